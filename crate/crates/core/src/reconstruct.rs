//! Photon statistics from click statistics, efficiency calibration, and
//! error propagation.
//!
//! The composite matrix `A = C L(eta)` has `K + 1` rows and `n_max + 1`
//! columns. Since `n` photons never produce more than `n` clicks, its top
//! `n_max + 1` rows form an upper-triangular block `T` and the remaining
//! rows vanish. The least-squares solution of `A p = rho` is therefore
//! `T^-1 rho_top`, obtained by back substitution; this stays accurate for
//! efficiencies of a few percent where a generic pseudo-inverse loses all
//! digits. `T` is column-stochastic, so `1^T T^-1 = 1^T`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::detector::{DetectorModel, TmdConfig};
use crate::dist::{ClickDistribution, JointClickDistribution, JointPhotonDistribution, PhotonDistribution};
use crate::error::{Error, Result};
use crate::nnls::nnls;

/// Step of the central difference used for the efficiency derivative.
pub const ETA_STEP: f64 = 1e-6;

/// Weight of the appended normalization row in the constrained solve.
const EQUALITY_WEIGHT: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Unconstrained least squares, then renormalization.
    #[default]
    Direct,
    /// Least squares subject to `p >= 0`, `sum p = 1`.
    Constrained,
}

/// Efficiency estimate from coincidence and singles rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub rate_coincidence: f64,
    pub rate_singles: f64,
    pub eta_estimate: f64,
    /// Zero when only rates (not counts) were supplied.
    pub eta_uncertainty: f64,
}

/// `eta_K = R_C / R_S` from rates; no uncertainty is attached.
pub fn klyshko_efficiency(r_coincidence: f64, r_singles: f64) -> Result<CalibrationRecord> {
    if !(r_coincidence.is_finite() && r_singles.is_finite()) || r_coincidence < 0.0 || r_singles < 0.0 {
        return Err(Error::domain("rates must be finite and non-negative"));
    }
    if r_singles == 0.0 {
        return Err(Error::Degenerate("zero singles rate".into()));
    }
    if r_coincidence > r_singles {
        return Err(Error::domain(format!(
            "coincidence rate {r_coincidence} exceeds singles rate {r_singles}"
        )));
    }
    Ok(CalibrationRecord {
        rate_coincidence: r_coincidence,
        rate_singles: r_singles,
        eta_estimate: r_coincidence / r_singles,
        eta_uncertainty: 0.0,
    })
}

/// `eta_K` from event counts, with the binomial standard error
/// `sqrt(eta (1 - eta) / singles)`.
pub fn klyshko_from_counts(coincidences: u64, singles: u64) -> Result<CalibrationRecord> {
    let mut record = klyshko_efficiency(coincidences as f64, singles as f64)?;
    let eta = record.eta_estimate;
    record.eta_uncertainty = (eta * (1.0 - eta) / singles as f64).sqrt();
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub dist: PhotonDistribution,
    /// Covariance of the entries of `dist`.
    pub covariance: DMatrix<f64>,
    pub condition_number: f64,
    /// `|A p - rho|_2`; for the direct method `p` is taken before
    /// renormalization, for the constrained method after.
    pub residual: f64,
    pub method: Method,
}

impl ReconstructionResult {
    /// Propagated standard deviation of `p_n`.
    pub fn std_dev(&self, n: usize) -> f64 {
        self.covariance[(n, n)].max(0.0).sqrt()
    }

    /// Propagated standard deviation of the mean photon number.
    pub fn mean_std_dev(&self) -> f64 {
        let n = DVector::from_fn(self.covariance.nrows(), |i, _| i as f64);
        (n.transpose() * &self.covariance * &n)[(0, 0)].max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointReconstructionResult {
    pub dist: JointPhotonDistribution,
    /// Covariance of the signal marginal of `dist`.
    pub signal_covariance: DMatrix<f64>,
    /// Covariance of the idler marginal of `dist`.
    pub idler_covariance: DMatrix<f64>,
    /// Product of the per-axis condition numbers.
    pub condition_number: f64,
    pub residual: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InversionOptions {
    pub method: Method,
    /// Standard deviation of the detector efficiency.
    pub sigma_eta: f64,
}

/// Triangular block of one detector's composite matrix and its inverse.
struct Inverter {
    config: TmdConfig,
    block: DMatrix<f64>,
    block_inv: DMatrix<f64>,
    condition_number: f64,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

impl Inverter {
    fn new(config: &TmdConfig) -> Result<Self> {
        let (n_max, bins) = (config.n_max(), config.bins());
        if n_max > bins {
            return Err(Error::Truncation { n_max, bins });
        }
        let model = DetectorModel::new(config)?;
        let block = model.composite().entries().rows(0, n_max + 1).into_owned();
        if let Some(n) = (0..=n_max).find(|&n| block[(n, n)].is_nan() || block[(n, n)] < f64::MIN_POSITIVE) {
            return Err(Error::Conditioning(format!(
                "composite matrix is rank deficient: diagonal entry {n} vanishes at efficiency {}",
                config.efficiency()
            )));
        }
        let block_inv = block
            .solve_upper_triangular(&DMatrix::identity(n_max + 1, n_max + 1))
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Conditioning("composite matrix cannot be inverted in floating point".into()))?;
        let condition_number = (spectral_norm(&block) * spectral_norm(&block_inv)).max(1.0);
        Ok(Self {
            config: config.clone(),
            block,
            block_inv,
            condition_number,
        })
    }

    fn size(&self) -> usize {
        self.block.nrows()
    }

    fn solve(&self, top: &DVector<f64>) -> DVector<f64> {
        self.block
            .solve_upper_triangular(top)
            .expect("diagonal checked non-zero")
    }

    /// Renormalized solution for clicks `top` at a different efficiency.
    fn solve_at(&self, eta: f64, top: &DVector<f64>) -> Result<DVector<f64>> {
        let p = Inverter::new(&self.config.with_efficiency(eta)?)?.solve(top);
        normalized(p)
    }

    /// First-order covariance of the renormalized solution: multinomial
    /// counting noise of `top` (if `shots` is known) plus efficiency noise.
    fn covariance(&self, top: &DVector<f64>, shots: Option<u64>, sigma_eta: f64) -> Result<DMatrix<f64>> {
        if !(sigma_eta.is_finite() && sigma_eta >= 0.0) {
            return Err(Error::domain(format!("sigma_eta must be finite and >= 0, got {sigma_eta}")));
        }
        let size = self.size();
        let mut cov = DMatrix::zeros(size, size);
        let total = top.sum();
        let p = normalized(self.solve(top))?;

        if let Some(n) = shots {
            let sigma_rho = (DMatrix::from_diagonal(top) - top * top.transpose()) / n as f64;
            let ones = DVector::from_element(size, 1.0);
            let jac = (DMatrix::identity(size, size) - &p * ones.transpose()) / total * &self.block_inv;
            cov += &jac * sigma_rho * jac.transpose();
        }

        if sigma_eta > 0.0 {
            let eta = self.config.efficiency();
            let hi = (eta + ETA_STEP).min(1.0);
            let lo = (eta - ETA_STEP).max(0.0);
            let p_hi = if hi == eta { p.clone() } else { self.solve_at(hi, top)? };
            let p_lo = if lo == eta { p.clone() } else { self.solve_at(lo, top)? };
            let grad = (p_hi - p_lo) / (hi - lo);
            cov += &grad * grad.transpose() * sigma_eta.powi(2);
        }

        Ok((&cov + cov.transpose()) / 2.0)
    }
}

fn normalized(p: DVector<f64>) -> Result<DVector<f64>> {
    let sum = p.sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(Error::Degenerate(format!("reconstructed mass {sum} cannot be renormalized")));
    }
    Ok(p / sum)
}

/// Least squares on `a x = b` with `x >= 0` and `sum x = 1`. Columns are
/// scaled to unit norm first; the equality enters as a heavily weighted
/// extra row.
fn constrained_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    let scale: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let row: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    let row_norm = row.iter().map(|r| r * r).sum::<f64>().sqrt();

    let mut aug = DMatrix::zeros(rows + 1, cols);
    for j in 0..cols {
        for i in 0..rows {
            aug[(i, j)] = a[(i, j)] / scale[j];
        }
        aug[(rows, j)] = EQUALITY_WEIGHT * row[j] / row_norm;
    }
    let mut rhs = DVector::zeros(rows + 1);
    rhs.rows_mut(0, rows).copy_from(b);
    rhs[rows] = EQUALITY_WEIGHT / row_norm;

    let y = nnls(&aug, &rhs)?;
    let x = DVector::from_fn(cols, |j, _| y[j] / scale[j]);
    normalized(x)
}

fn check_bins(what: &str, tmd: &TmdConfig, bins: usize) -> Result<()> {
    if bins != tmd.bins() {
        return Err(Error::domain(format!(
            "{what} clicks cover 0..={bins} but the detector has {} bins",
            tmd.bins()
        )));
    }
    Ok(())
}

/// Reconstructs the photon distribution seen by one detector with the
/// direct method and no efficiency uncertainty.
pub fn invert_single(tmd: &TmdConfig, clicks: &ClickDistribution) -> Result<ReconstructionResult> {
    invert_single_with(tmd, clicks, &InversionOptions::default())
}

pub fn invert_single_with(
    tmd: &TmdConfig,
    clicks: &ClickDistribution,
    opts: &InversionOptions,
) -> Result<ReconstructionResult> {
    check_bins("single-detector", tmd, clicks.bins())?;
    let inv = Inverter::new(tmd)?;
    let size = inv.size();
    let rho = DVector::from_column_slice(clicks.probs());
    let top = rho.rows(0, size).into_owned();
    let tail_sq = rho.rows(size, rho.len() - size).norm_squared();

    let raw = inv.solve(&top);
    let (p, residual) = match opts.method {
        Method::Direct => {
            let residual = ((&inv.block * &raw - &top).norm_squared() + tail_sq).sqrt();
            (normalized(raw)?, residual)
        }
        Method::Constrained => {
            let p = constrained_solve(&inv.block, &top)?;
            let residual = ((&inv.block * &p - &top).norm_squared() + tail_sq).sqrt();
            (p, residual)
        }
    };
    let covariance = inv.covariance(&top, clicks.shots(), opts.sigma_eta)?;
    Ok(ReconstructionResult {
        dist: PhotonDistribution::new(p.iter().copied().collect())?,
        covariance,
        condition_number: inv.condition_number,
        residual,
        method: opts.method,
    })
}

/// Covariance of the directly reconstructed distribution.
pub fn propagate_errors(tmd: &TmdConfig, clicks: &ClickDistribution, sigma_eta: f64) -> Result<DMatrix<f64>> {
    let opts = InversionOptions {
        method: Method::Direct,
        sigma_eta,
    };
    Ok(invert_single_with(tmd, clicks, &opts)?.covariance)
}

/// Reconstructs the joint photon distribution from joint clicks of two
/// detectors with the direct method.
pub fn invert_joint(
    tmd_s: &TmdConfig,
    tmd_i: &TmdConfig,
    clicks: &JointClickDistribution,
) -> Result<JointReconstructionResult> {
    invert_joint_with(tmd_s, tmd_i, clicks, Method::Direct, [0.0, 0.0])
}

/// `sigma_eta` holds the efficiency uncertainties of signal and idler.
pub fn invert_joint_with(
    tmd_s: &TmdConfig,
    tmd_i: &TmdConfig,
    clicks: &JointClickDistribution,
    method: Method,
    sigma_eta: [f64; 2],
) -> Result<JointReconstructionResult> {
    let r = clicks.probs();
    check_bins("signal", tmd_s, r.nrows() - 1)?;
    check_bins("idler", tmd_i, r.ncols() - 1)?;
    let inv_s = Inverter::new(tmd_s)?;
    let inv_i = Inverter::new(tmd_i)?;
    let (ns, ni) = (inv_s.size(), inv_i.size());
    let top = r.view((0, 0), (ns, ni)).into_owned();
    let tail_sq = r.norm_squared() - top.norm_squared();

    let forward = |p: &DMatrix<f64>| &inv_s.block * p * inv_i.block.transpose();
    let (p, residual) = match method {
        Method::Direct => {
            let half = inv_s.block.solve_upper_triangular(&top).expect("diagonal checked non-zero");
            let raw = inv_i
                .block
                .solve_upper_triangular(&half.transpose())
                .expect("diagonal checked non-zero")
                .transpose();
            let residual = ((forward(&raw) - &top).norm_squared() + tail_sq).max(0.0).sqrt();
            let sum = raw.sum();
            if !(sum.is_finite() && sum > 0.0) {
                return Err(Error::Degenerate(format!("reconstructed mass {sum} cannot be renormalized")));
            }
            (raw / sum, residual)
        }
        Method::Constrained => {
            let a = inv_s.block.kronecker(&inv_i.block);
            let b = DVector::from_fn(ns * ni, |k, _| top[(k / ni, k % ni)]);
            let x = constrained_solve(&a, &b)?;
            let p = DMatrix::from_fn(ns, ni, |n, m| x[n * ni + m]);
            let residual = ((forward(&p) - &top).norm_squared() + tail_sq).max(0.0).sqrt();
            (p, residual)
        }
    };

    let signal_top = DVector::from_fn(ns, |c, _| top.row(c).sum());
    let idler_top = DVector::from_fn(ni, |d, _| top.column(d).sum());
    Ok(JointReconstructionResult {
        dist: JointPhotonDistribution::new(p)?,
        signal_covariance: inv_s.covariance(&signal_top, clicks.shots(), sigma_eta[0])?,
        idler_covariance: inv_i.covariance(&idler_top, clicks.shots(), sigma_eta[1])?,
        condition_number: inv_s.condition_number * inv_i.condition_number,
        residual,
        method,
    })
}

/// Condition number of the composite matrix of `tmd`.
pub fn condition_number(tmd: &TmdConfig) -> Result<f64> {
    Ok(Inverter::new(tmd)?.condition_number)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{forward, joint_forward};
    use crate::sources::{poisson_dist, thermal_dist, twin_beam_joint};

    fn tmd(eta: f64, n_max: usize) -> TmdConfig {
        TmdConfig::uniform(8, eta, n_max).unwrap()
    }

    #[test]
    fn klyshko_examples() {
        assert_eq!(klyshko_efficiency(0.0, 10.0).unwrap().eta_estimate, 0.0);
        assert_eq!(klyshko_efficiency(1000.0, 1000.0).unwrap().eta_estimate, 1.0);
        let eta = klyshko_efficiency(674.0, 5764.0).unwrap().eta_estimate;
        assert!((eta - 0.117).abs() < 5e-4, "{eta}");
        assert!(matches!(klyshko_efficiency(2.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(klyshko_efficiency(0.0, 0.0), Err(Error::Degenerate(_))));
        let rec = klyshko_from_counts(250, 1000).unwrap();
        assert!((rec.eta_uncertainty - (0.25f64 * 0.75 / 1000.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn vacuum_roundtrip() {
        let clicks = ClickDistribution::exact(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let r = invert_single(&tmd(0.3, 8), &clicks).unwrap();
        assert!((r.dist.get(0) - 1.0).abs() < 1e-15);
        assert!(r.covariance.iter().all(|&v| v == 0.0));
        assert!(r.condition_number >= 1.0);
    }

    #[test]
    fn thermal_roundtrip_at_full_truncation() {
        let t = tmd(0.117, 8);
        let p = thermal_dist(0.5, 8).unwrap();
        let r = invert_single(&t, &forward(&t, &p).unwrap()).unwrap();
        assert!(r.dist.max_abs_diff(&p) < 1e-8);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn low_efficiency_roundtrip() {
        let t = tmd(0.02, 8);
        let p = poisson_dist(1.0, 8).unwrap();
        let r = invert_single(&t, &forward(&t, &p).unwrap()).unwrap();
        assert!(r.dist.max_abs_diff(&p) < 1e-6, "{}", r.dist.max_abs_diff(&p));
    }

    #[test]
    fn refuses_underdetermined_and_singular() {
        let clicks = ClickDistribution::exact(vec![1.0, 0.0, 0.0]).unwrap();
        let t = TmdConfig::uniform(2, 0.5, 3).unwrap();
        assert!(matches!(invert_single(&t, &clicks), Err(Error::Truncation { n_max: 3, bins: 2 })));
        let t = TmdConfig::uniform(2, 0.0, 2).unwrap();
        assert!(matches!(invert_single(&t, &clicks), Err(Error::Conditioning(_))));
        let t = TmdConfig::uniform(3, 0.5, 2).unwrap();
        assert!(matches!(invert_single(&t, &clicks), Err(Error::Domain(_))));
    }

    #[test]
    fn constrained_is_physical_on_noisy_input() {
        let t = tmd(0.1, 4);
        // Clicks that no physical state produces at this efficiency.
        let clicks = ClickDistribution::with_shots(
            vec![0.80, 0.08, 0.10, 0.0, 0.02, 0.0, 0.0, 0.0, 0.0],
            Some(10_000),
        )
        .unwrap();
        let direct = invert_single(&t, &clicks).unwrap();
        assert!(!direct.dist.is_physical());
        let opts = InversionOptions {
            method: Method::Constrained,
            sigma_eta: 0.0,
        };
        let c = invert_single_with(&t, &clicks, &opts).unwrap();
        assert!(c.dist.probs().iter().all(|&p| p >= 0.0));
        assert!((c.dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.residual >= direct.residual);
    }

    #[test]
    fn exact_clicks_give_zero_counting_covariance() {
        let t = tmd(0.117, 4);
        let clicks = forward(&t, &thermal_dist(0.5, 4).unwrap()).unwrap();
        let cov = propagate_errors(&t, &clicks, 0.0).unwrap();
        assert!(cov.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn efficiency_derivative_matches_coarse_difference() {
        let t = tmd(0.117, 3);
        let clicks = forward(&t, &thermal_dist(0.5, 3).unwrap()).unwrap();
        let cov = propagate_errors(&t, &clicks, 1.0).unwrap();
        let inv = Inverter::new(&t).unwrap();
        let top = DVector::from_column_slice(&clicks.probs()[..4]);
        let h = 1e-4;
        let coarse = (inv.solve_at(0.117 + h, &top).unwrap() - inv.solve_at(0.117 - h, &top).unwrap()) / (2.0 * h);
        for n in 0..4 {
            let fine = cov[(n, n)].sqrt();
            assert!((fine - coarse[n].abs()).abs() < 1e-5 * (1.0 + fine), "n = {n}: {fine} vs {}", coarse[n]);
        }
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let t = tmd(0.117, 4);
        let clicks = ClickDistribution::with_shots(forward(&t, &thermal_dist(0.5, 4).unwrap()).unwrap().probs().to_vec(), Some(100_000)).unwrap();
        let cov = propagate_errors(&t, &clicks, 0.009).unwrap();
        assert_eq!(cov, cov.transpose());
        let eig = cov.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > -1e-9));
    }

    #[test]
    fn condition_number_decreases_with_efficiency() {
        let etas = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0];
        let conds: Vec<f64> = etas.iter().map(|&e| condition_number(&tmd(e, 8)).unwrap()).collect();
        for w in conds.windows(2) {
            assert!(w[1] <= w[0], "{conds:?}");
        }
    }

    #[test]
    fn joint_roundtrip() {
        let ts = tmd(0.3, 8);
        let ti = tmd(0.4, 8);
        let joint = twin_beam_joint(&thermal_dist(0.5, 8).unwrap());
        let clicks = joint_forward(&ts, &ti, &joint).unwrap();
        let r = invert_joint(&ts, &ti, &clicks).unwrap();
        assert!(r.dist.max_abs_diff(&joint) < 1e-8);
        assert!(r.condition_number >= 1.0);

        let mut vac = DMatrix::zeros(9, 9);
        vac[(0, 0)] = 1.0;
        let r = invert_joint(&ts, &ti, &JointClickDistribution::exact(vac).unwrap()).unwrap();
        assert!((r.dist.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn joint_constrained_matches_direct_on_exact_input() {
        let ts = tmd(0.3, 3);
        let ti = tmd(0.4, 3);
        let joint = twin_beam_joint(&poisson_dist(0.2, 3).unwrap());
        let clicks = joint_forward(&ts, &ti, &joint).unwrap();
        let r = invert_joint_with(&ts, &ti, &clicks, Method::Constrained, [0.0, 0.0]).unwrap();
        assert!(r.dist.max_abs_diff(&joint) < 1e-6, "{}", r.dist.max_abs_diff(&joint));
    }

    #[test]
    fn joint_marginal_covariance_matches_single_inversion() {
        let ts = tmd(0.3, 3);
        let ti = tmd(0.4, 3);
        let joint = twin_beam_joint(&thermal_dist(0.5, 3).unwrap());
        let exact = joint_forward(&ts, &ti, &joint).unwrap();
        let clicks = JointClickDistribution::with_shots(exact.probs().clone(), Some(50_000)).unwrap();
        let r = invert_joint(&ts, &ti, &clicks).unwrap();
        let single = invert_single(&ts, &clicks.signal_marginal()).unwrap();
        // Here the click space beyond n_max carries no mass, so the
        // restricted and full marginals agree.
        assert!((&r.signal_covariance - &single.covariance).abs().max() < 1e-15);
    }

    #[test]
    fn joint_constrained_survives_ill_conditioned_noise() {
        // Condition number ~5e9: roundoff used to cycle the active set.
        let ts = tmd(0.0274, 3);
        let ti = tmd(0.111, 3);
        let joint = twin_beam_joint(&poisson_dist(0.2, 10).unwrap());
        let exact = joint_forward(&ts.with_n_max(10), &ti.with_n_max(10), &joint).unwrap();
        let noisy = DMatrix::from_fn(9, 9, |c, d| {
            let wiggle = 1.0 + 0.05 * (((7 * c + 3 * d) % 5) as f64 - 2.0);
            exact.get(c, d) * wiggle
        });
        let total = noisy.sum();
        let clicks = JointClickDistribution::with_shots(noisy / total, Some(10_000_000)).unwrap();
        let r = invert_joint_with(&ts, &ti, &clicks, Method::Constrained, [0.009, 0.009]).unwrap();
        assert!(r.dist.probs().iter().all(|&x| x >= 0.0));
        assert!((r.dist.probs().sum() - 1.0).abs() < 1e-9);
    }
}
