//! Photon-number statistics of twin-beam sources and single-beam references.

use nalgebra::DMatrix;

use crate::dist::{JointPhotonDistribution, PhotonDistribution};
use crate::error::{Error, Result};

fn check_mean(mean: f64) -> Result<()> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::domain(format!("mean photon number must be finite and >= 0, got {mean}")));
    }
    Ok(())
}

/// Single-mode thermal statistics `p_n = mean^n / (1 + mean)^(n+1)`,
/// truncated at `n_max` and renormalized.
pub fn thermal_dist(mean: f64, n_max: usize) -> Result<PhotonDistribution> {
    check_mean(mean)?;
    if mean == 0.0 {
        return Ok(PhotonDistribution::vacuum(n_max));
    }
    let ratio = mean / (1.0 + mean);
    let mut w = Vec::with_capacity(n_max + 1);
    let mut term = 1.0 / (1.0 + mean);
    for _ in 0..=n_max {
        w.push(term);
        term *= ratio;
    }
    PhotonDistribution::from_weights(w)
}

/// Poissonian statistics `p_n = exp(-mean) mean^n / n!`, truncated and
/// renormalized.
pub fn poisson_dist(mean: f64, n_max: usize) -> Result<PhotonDistribution> {
    check_mean(mean)?;
    if mean == 0.0 {
        return Ok(PhotonDistribution::vacuum(n_max));
    }
    let mut w = Vec::with_capacity(n_max + 1);
    let mut term = (-mean).exp();
    for n in 0..=n_max {
        w.push(term);
        term *= mean / (n + 1) as f64;
    }
    PhotonDistribution::from_weights(w)
}

/// Distribution of the sum of two independent photon numbers, kept to the
/// full support `0..=a.n_max + b.n_max`.
pub fn convolve(a: &PhotonDistribution, b: &PhotonDistribution) -> PhotonDistribution {
    let mut out = vec![0.0; a.n_max() + b.n_max() + 1];
    for (i, pa) in a.probs().iter().enumerate() {
        for (j, pb) in b.probs().iter().enumerate() {
            out[i + j] += pa * pb;
        }
    }
    PhotonDistribution::new(out).expect("convolution of normalized distributions")
}

/// Pair-number statistics of `modes` independent thermal modes sharing
/// `total_mean` equally: the negative binomial
/// `p_n = C(n + M - 1, n) x^n (1 + x)^(-n - M)` with `x = total_mean / M`.
pub fn multimode_pair_dist(modes: u64, total_mean: f64, n_max: usize) -> Result<PhotonDistribution> {
    if modes == 0 {
        return Err(Error::domain("mode count must be at least 1"));
    }
    check_mean(total_mean)?;
    if total_mean == 0.0 {
        return Ok(PhotonDistribution::vacuum(n_max));
    }
    let m = modes as f64;
    let x = total_mean / m;
    let ratio = x / (1.0 + x);
    let mut w = Vec::with_capacity(n_max + 1);
    let mut term = (-m * x.ln_1p()).exp();
    for n in 0..=n_max {
        w.push(term);
        term *= (n as f64 + m) / (n + 1) as f64 * ratio;
    }
    PhotonDistribution::from_weights(w)
}

/// Multimode pair statistics with an explicit mean per mode, built by
/// convolving the single-mode thermal distributions.
pub fn multimode_pair_dist_weighted(mode_means: &[f64], n_max: usize) -> Result<PhotonDistribution> {
    if mode_means.is_empty() {
        return Err(Error::domain("at least one mode is required"));
    }
    let mut acc = PhotonDistribution::vacuum(0);
    for &mean in mode_means {
        let mode = thermal_dist(mean, n_max)?;
        let full = convolve(&acc, &mode);
        acc = PhotonDistribution::from_weights(full.probs()[..=n_max.min(full.n_max())].to_vec())?;
    }
    acc.padded(n_max)
}

/// Diagonal joint distribution `p_{n,n} = pair_dist(n)` of a twin beam.
pub fn twin_beam_joint(pair_dist: &PhotonDistribution) -> JointPhotonDistribution {
    let size = pair_dist.n_max() + 1;
    let mut probs = DMatrix::zeros(size, size);
    for (n, p) in pair_dist.probs().iter().enumerate() {
        probs[(n, n)] = *p;
    }
    JointPhotonDistribution::new(probs).expect("diagonal of a normalized distribution")
}

/// A light source described by its photon-number statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceModel {
    /// Signal and idler carry exactly the same photon number, drawn from
    /// `pair_dist`.
    TwinBeam { pair_dist: PhotonDistribution },
    /// Only the signal arm is populated; the idler arm is vacuum.
    SingleBeam { dist: PhotonDistribution },
}

fn require_nonnegative(d: &PhotonDistribution) -> Result<()> {
    if d.probs().iter().any(|&p| p < 0.0) {
        return Err(Error::domain("source statistics must be non-negative"));
    }
    Ok(())
}

impl SourceModel {
    pub fn twin_beam(pair_dist: PhotonDistribution) -> Result<Self> {
        require_nonnegative(&pair_dist)?;
        Ok(SourceModel::TwinBeam { pair_dist })
    }

    pub fn single_beam(dist: PhotonDistribution) -> Result<Self> {
        require_nonnegative(&dist)?;
        Ok(SourceModel::SingleBeam { dist })
    }

    /// Two-mode squeezer: thermal pair statistics.
    pub fn single_mode_squeezer(mean: f64, n_max: usize) -> Result<Self> {
        Self::twin_beam(thermal_dist(mean, n_max)?)
    }

    pub fn multimode(modes: u64, total_mean: f64, n_max: usize) -> Result<Self> {
        Self::twin_beam(multimode_pair_dist(modes, total_mean, n_max)?)
    }

    pub fn poisson_pairs(mean: f64, n_max: usize) -> Result<Self> {
        Self::twin_beam(poisson_dist(mean, n_max)?)
    }

    pub fn fock_pairs(n: usize) -> Self {
        SourceModel::TwinBeam {
            pair_dist: PhotonDistribution::fock(n, n),
        }
    }

    pub fn thermal_beam(mean: f64, n_max: usize) -> Result<Self> {
        Self::single_beam(thermal_dist(mean, n_max)?)
    }

    pub fn poisson_beam(mean: f64, n_max: usize) -> Result<Self> {
        Self::single_beam(poisson_dist(mean, n_max)?)
    }

    pub fn fock_beam(n: usize) -> Self {
        SourceModel::SingleBeam {
            dist: PhotonDistribution::fock(n, n),
        }
    }

    /// Photon-number statistics emitted into the signal arm.
    pub fn photon_dist(&self) -> &PhotonDistribution {
        match self {
            SourceModel::TwinBeam { pair_dist } => pair_dist,
            SourceModel::SingleBeam { dist } => dist,
        }
    }

    pub fn joint(&self) -> JointPhotonDistribution {
        match self {
            SourceModel::TwinBeam { pair_dist } => twin_beam_joint(pair_dist),
            SourceModel::SingleBeam { dist } => {
                JointPhotonDistribution::product(dist, &PhotonDistribution::vacuum(0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{correlation, marginals, moment};

    #[test]
    fn zero_mean_is_vacuum() {
        assert_eq!(thermal_dist(0.0, 5).unwrap().probs()[0], 1.0);
        assert_eq!(poisson_dist(0.0, 5).unwrap().probs()[0], 1.0);
        assert_eq!(multimode_pair_dist(3, 0.0, 5).unwrap().probs()[0], 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(thermal_dist(-0.1, 5).is_err());
        assert!(poisson_dist(f64::NAN, 5).is_err());
        assert!(multimode_pair_dist(0, 1.0, 5).is_err());
        assert!(SourceModel::twin_beam(PhotonDistribution::new(vec![1.0005, -0.0005]).unwrap()).is_err());
    }

    #[test]
    fn thermal_values() {
        let t = thermal_dist(1.0, 60).unwrap();
        for (n, expect) in [(0, 0.5), (1, 0.25), (2, 0.125)] {
            assert!((t.get(n) - expect).abs() < 1e-15);
        }
        assert!((t.mean() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn poisson_values() {
        let p = poisson_dist(1.0, 30).unwrap();
        assert!((p.get(0) - 0.3679).abs() < 1e-4);
        assert!((p.get(1) - 0.3679).abs() < 1e-4);
        let p = poisson_dist(2.0, 60).unwrap();
        assert!((p.variance() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn convolve_identity_and_poisson() {
        let x = thermal_dist(0.7, 12).unwrap();
        let c = convolve(&PhotonDistribution::vacuum(0), &x);
        assert_eq!(c, x);

        // Closed form of the convolved Poissonians over the region where
        // neither truncation interferes.
        let a = poisson_dist(0.4, 40).unwrap();
        let b = poisson_dist(0.9, 40).unwrap();
        let c = convolve(&a, &b);
        let mut term = (-1.3f64).exp();
        for n in 0..=40 {
            assert!((c.get(n) - term).abs() < 1e-12, "n = {n}");
            term *= 1.3 / (n + 1) as f64;
        }
    }

    #[test]
    fn two_thermals_make_negative_binomial() {
        let t = thermal_dist(0.5, 40).unwrap();
        let c = convolve(&t, &t);
        // p_n = (n + 1) x^n (1 + x)^(-n-2), x = 1/2, exact on 0..=40 up to
        // the 3^-41 truncation of each factor.
        for n in 0..=40usize {
            let nb = (n + 1) as f64 * 0.5f64.powi(n as i32) * 1.5f64.powi(-(n as i32) - 2);
            assert!((c.get(n) - nb).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn multimode_limits() {
        let m1 = multimode_pair_dist(1, 1.3, 30).unwrap();
        assert!(m1.max_abs_diff(&thermal_dist(1.3, 30).unwrap()) < 1e-15);

        let m2 = multimode_pair_dist(2, 1.0, 30).unwrap();
        let t = thermal_dist(0.5, 30).unwrap();
        let c = convolve(&t, &t);
        let c = PhotonDistribution::from_weights(c.probs()[..=30].to_vec()).unwrap();
        assert!(m2.max_abs_diff(&c) < 1e-12);

        let big = multimode_pair_dist(10_000, 1.0, 30).unwrap();
        assert!(big.total_variation(&poisson_dist(1.0, 30).unwrap()) < 1e-3);
    }

    #[test]
    fn weighted_modes_match_equal_split() {
        let w = multimode_pair_dist_weighted(&[0.25; 4], 20).unwrap();
        let m = multimode_pair_dist(4, 1.0, 20).unwrap();
        assert!(w.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn twin_beam_joint_structure() {
        let j = twin_beam_joint(&PhotonDistribution::vacuum(3));
        assert_eq!(j.get(0, 0), 1.0);
        let j = twin_beam_joint(&PhotonDistribution::fock(1, 1));
        assert_eq!(j.get(1, 1), 1.0);

        let t = thermal_dist(1.0, 23).unwrap();
        let j = twin_beam_joint(&t);
        assert!((correlation(&j).unwrap() - 1.0).abs() < 1e-12);
        let (s, i) = marginals(&j);
        assert_eq!(s, t);
        assert_eq!(i, t);
        assert!((moment(&s, 1) - t.mean()).abs() < 1e-15);
    }
}
