//! Moments, marginal/conditional/collective statistics, correlation figures
//! of merit and single-parameter fits on photon-number distributions.

use serde::{Deserialize, Serialize};

use crate::dist::{Axis, JointPhotonDistribution, PhotonDistribution};
use crate::error::{Error, Result};
use crate::sources;

/// `sum_n n^m p_n`. `m = 0` yields the total probability.
pub fn moment(dist: &PhotonDistribution, m: u32) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64).powi(m as i32) * p)
        .sum()
}

/// Signal (row-sum) and idler (column-sum) marginals.
pub fn marginals(joint: &JointPhotonDistribution) -> (PhotonDistribution, PhotonDistribution) {
    let p = joint.probs();
    let signal: Vec<f64> = (0..p.nrows()).map(|n| p.row(n).sum()).collect();
    let idler: Vec<f64> = (0..p.ncols()).map(|m| p.column(m).sum()).collect();
    (from_valid_sums(signal), from_valid_sums(idler))
}

// Partial sums of a validated joint distribution inherit its normalization.
fn from_valid_sums(v: Vec<f64>) -> PhotonDistribution {
    PhotonDistribution::new(v).expect("sums of a normalized joint distribution")
}

/// Distribution of the other arm given that `herald_axis` registered
/// exactly `herald_value` photons.
pub fn conditional(
    joint: &JointPhotonDistribution,
    herald_axis: Axis,
    herald_value: usize,
) -> Result<PhotonDistribution> {
    let p = joint.probs();
    let slice: Vec<f64> = match herald_axis {
        Axis::Signal => {
            if herald_value >= p.nrows() {
                return Err(Error::Degenerate(format!(
                    "herald value {herald_value} is beyond the signal truncation"
                )));
            }
            p.row(herald_value).iter().copied().collect()
        }
        Axis::Idler => {
            if herald_value >= p.ncols() {
                return Err(Error::Degenerate(format!(
                    "herald value {herald_value} is beyond the idler truncation"
                )));
            }
            p.column(herald_value).iter().copied().collect()
        }
    };
    let total: f64 = slice.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate(format!(
            "herald slice {herald_axis:?} = {herald_value} has probability {total}"
        )));
    }
    PhotonDistribution::from_weights(slice)
}

/// Distribution of the total photon number `n + m` of both arms.
pub fn combine_collective(joint: &JointPhotonDistribution) -> PhotonDistribution {
    let p = joint.probs();
    let mut q = vec![0.0; p.nrows() + p.ncols() - 1];
    for n in 0..p.nrows() {
        for m in 0..p.ncols() {
            q[n + m] += p[(n, m)];
        }
    }
    from_valid_sums(q)
}

/// First and second moments of a joint photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointMoments {
    pub mean_s: f64,
    pub mean_i: f64,
    pub var_s: f64,
    pub var_i: f64,
    pub cov: f64,
    /// `Var(n_s - n_i)`.
    pub var_diff: f64,
}

pub fn joint_moments(joint: &JointPhotonDistribution) -> JointMoments {
    let p = joint.probs();
    let (mut mean_s, mut mean_i, mut mean_d) = (0.0, 0.0, 0.0);
    for n in 0..p.nrows() {
        for m in 0..p.ncols() {
            let w = p[(n, m)];
            mean_s += n as f64 * w;
            mean_i += m as f64 * w;
            mean_d += (n as f64 - m as f64) * w;
        }
    }
    let (mut var_s, mut var_i, mut cov, mut var_diff) = (0.0, 0.0, 0.0, 0.0);
    for n in 0..p.nrows() {
        for m in 0..p.ncols() {
            let w = p[(n, m)];
            let ds = n as f64 - mean_s;
            let di = m as f64 - mean_i;
            let dd = (n as f64 - m as f64) - mean_d;
            var_s += ds * ds * w;
            var_i += di * di * w;
            cov += ds * di * w;
            var_diff += dd * dd * w;
        }
    }
    JointMoments {
        mean_s,
        mean_i,
        var_s,
        var_i,
        cov,
        var_diff,
    }
}

/// Pearson correlation coefficient of the signal and idler photon numbers.
pub fn correlation(joint: &JointPhotonDistribution) -> Result<f64> {
    let mo = joint_moments(joint);
    if !(mo.var_s > 0.0 && mo.var_i > 0.0) {
        return Err(Error::Degenerate(format!(
            "correlation needs positive marginal variances (signal {}, idler {})",
            mo.var_s, mo.var_i
        )));
    }
    Ok(mo.cov / (mo.var_s * mo.var_i).sqrt())
}

fn variance_ratio_db(var_diff: f64, norm: f64) -> Result<f64> {
    if var_diff == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if var_diff < 0.0 {
        return Err(Error::Degenerate(format!(
            "Var(n_s - n_i) = {var_diff:e} is negative; the distribution is non-physical"
        )));
    }
    Ok(10.0 * (var_diff / norm).log10())
}

/// Twin-beam number squeezing `10 log10(Var(n_s - n_i) / (<n_s> <n_i>))`.
///
/// An exactly noiseless photon-number difference returns
/// `f64::NEG_INFINITY`.
pub fn number_squeezing_db(joint: &JointPhotonDistribution) -> Result<f64> {
    let mo = joint_moments(joint);
    if !(mo.mean_s > 0.0 && mo.mean_i > 0.0) {
        return Err(Error::Degenerate(format!(
            "squeezing needs positive means (signal {}, idler {})",
            mo.mean_s, mo.mean_i
        )));
    }
    variance_ratio_db(mo.var_diff, mo.mean_s * mo.mean_i)
}

/// Noise reduction factor `10 log10(Var(n_s - n_i) / (<n_s> + <n_i>))`,
/// i.e. the difference variance relative to the shot-noise level of two
/// independent Poissonian beams.
pub fn noise_reduction_db(joint: &JointPhotonDistribution) -> Result<f64> {
    let mo = joint_moments(joint);
    if !(mo.mean_s > 0.0 && mo.mean_i > 0.0) {
        return Err(Error::Degenerate(format!(
            "noise reduction needs positive means (signal {}, idler {})",
            mo.mean_s, mo.mean_i
        )));
    }
    variance_ratio_db(mo.var_diff, mo.mean_s + mo.mean_i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitFamily {
    Poisson,
    Thermal,
}

impl FitFamily {
    fn model(self, mean: f64, n_max: usize) -> Result<PhotonDistribution> {
        match self {
            FitFamily::Poisson => sources::poisson_dist(mean, n_max),
            FitFamily::Thermal => sources::thermal_dist(mean, n_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FitFamily,
    /// Mean photon number of the best-fit member of the family.
    pub mean: f64,
    /// Euclidean distance between the data and the fitted distribution.
    pub residual_l2: f64,
    /// Observed minus fitted probability, per photon number.
    pub per_bin_deviation: Vec<f64>,
}

pub const FIT_MAX_ITER: usize = 200;
pub const FIT_TOL: f64 = 1e-9;
const FIT_GRID: usize = 400;

pub fn fit_poisson(dist: &PhotonDistribution) -> Result<FitResult> {
    fit_family(dist, FitFamily::Poisson)
}

pub fn fit_thermal(dist: &PhotonDistribution) -> Result<FitResult> {
    fit_family(dist, FitFamily::Thermal)
}

fn l2_distance(dist: &PhotonDistribution, model: &PhotonDistribution) -> f64 {
    dist.probs()
        .iter()
        .zip(model.probs())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Least-squares fit of the truncated family to `dist` over the mean.
///
/// A coarse grid locates the basin, golden-section search refines it. The
/// objective is the l2 norm itself rather than its square so that exact
/// self-fits converge to machine precision.
pub fn fit_family(dist: &PhotonDistribution, family: FitFamily) -> Result<FitResult> {
    let n_max = dist.n_max();
    let objective = |mu: f64| -> f64 {
        family
            .model(mu, n_max)
            .map(|m| l2_distance(dist, &m))
            .unwrap_or(f64::INFINITY)
    };

    let upper = (n_max as f64).max(2.0 * dist.mean().max(0.0) + 1.0);
    let step = upper / FIT_GRID as f64;
    let (best_idx, _) = (0..=FIT_GRID)
        .map(|i| (i, objective(i as f64 * step)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let lo = best_idx.saturating_sub(1) as f64 * step;
    let hi = ((best_idx + 1).min(FIT_GRID)) as f64 * step;

    let (mean, _) = golden_section(objective, lo, hi, FIT_TOL, FIT_MAX_ITER)?;
    let model = family.model(mean, n_max)?;
    let per_bin_deviation: Vec<f64> = dist
        .probs()
        .iter()
        .zip(model.probs())
        .map(|(a, b)| a - b)
        .collect();
    let residual_l2 = per_bin_deviation.iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(FitResult {
        family,
        mean,
        residual_l2,
        per_bin_deviation,
    })
}

/// Minimizes a unimodal `f` on `[lo, hi]`. Returns the best point evaluated,
/// endpoints included.
pub(crate) fn golden_section(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut best = [(lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold((lo, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        for cand in [(x1, f1), (x2, f2)] {
            if cand.1 < best.1 {
                best = cand;
            }
        }
        if hi - lo <= tol {
            return Ok(best);
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    Err(Error::Numerical(format!(
        "golden-section search did not reach width {tol:e} in {max_iter} iterations \
         (bracket [{lo}, {hi}], best x = {}, f = {:e})",
        best.0, best.1
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{poisson_dist, thermal_dist, twin_beam_joint};

    fn dist(v: &[f64]) -> PhotonDistribution {
        PhotonDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn moments_of_trivial_states() {
        assert_eq!(moment(&PhotonDistribution::vacuum(3), 2), 0.0);
        assert_eq!(moment(&PhotonDistribution::fock(1, 3), 5), 1.0);
        assert_eq!(moment(&dist(&[0.25, 0.75]), 0), 1.0);
    }

    #[test]
    fn poisson_second_moment() {
        // <n^2> = mu^2 + mu
        let p = poisson_dist(1.0, 30).unwrap();
        assert!((moment(&p, 2) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn marginals_of_product_and_diagonal() {
        let a = dist(&[0.2, 0.5, 0.3]);
        let b = dist(&[0.6, 0.4]);
        let (ms, mi) = marginals(&JointPhotonDistribution::product(&a, &b));
        assert!(ms.max_abs_diff(&a) < 1e-15);
        assert!(mi.max_abs_diff(&b) < 1e-15);

        let (ms, mi) = marginals(&twin_beam_joint(&a));
        assert_eq!(ms, a);
        assert_eq!(mi, a);
    }

    #[test]
    fn conditional_of_twin_beam_and_product() {
        let q = dist(&[0.5, 0.3, 0.2]);
        let c = conditional(&twin_beam_joint(&q), Axis::Idler, 1).unwrap();
        assert_eq!(c.probs(), &[0.0, 1.0, 0.0]);

        let a = dist(&[0.2, 0.5, 0.3]);
        let b = dist(&[0.6, 0.4]);
        let joint = JointPhotonDistribution::product(&a, &b);
        for herald in 0..2 {
            let c = conditional(&joint, Axis::Idler, herald).unwrap();
            assert!(c.max_abs_diff(&a) < 1e-15);
        }
    }

    #[test]
    fn conditional_rejects_empty_slice() {
        let q = dist(&[0.5, 0.5, 0.0]);
        let err = conditional(&twin_beam_joint(&q), Axis::Signal, 2).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(conditional(&twin_beam_joint(&q), Axis::Signal, 7).is_err());
    }

    #[test]
    fn collective_of_twin_beam_suppresses_odd() {
        let q = dist(&[0.4, 0.3, 0.2, 0.1]);
        let c = combine_collective(&twin_beam_joint(&q));
        assert_eq!(c.n_max(), 6);
        for n in 0..=3 {
            assert!((c.get(2 * n) - q.get(n)).abs() < 1e-15);
        }
        for j in [1, 3, 5] {
            assert_eq!(c.get(j), 0.0);
        }
        let vac = combine_collective(&JointPhotonDistribution::vacuum(2));
        assert_eq!(vac.get(0), 1.0);
    }

    #[test]
    fn collective_of_independent_poissonians() {
        let a = poisson_dist(0.7, 30).unwrap();
        let b = poisson_dist(1.3, 30).unwrap();
        let c = combine_collective(&JointPhotonDistribution::product(&a, &b));
        // Exact only over 0..=30 where the truncation of a, b does not bite.
        let reference = poisson_dist(2.0, 60).unwrap();
        for j in 0..=30 {
            assert!((c.get(j) - reference.get(j)).abs() < 1e-12, "j = {j}");
        }
    }

    #[test]
    fn correlation_limits() {
        let q = dist(&[0.4, 0.3, 0.2, 0.1]);
        assert!((correlation(&twin_beam_joint(&q)).unwrap() - 1.0).abs() < 1e-12);
        let a = dist(&[0.2, 0.5, 0.3]);
        let b = dist(&[0.6, 0.4]);
        let r = correlation(&JointPhotonDistribution::product(&a, &b)).unwrap();
        assert!(r.abs() < 1e-12);
        let err = correlation(&JointPhotonDistribution::vacuum(3)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn squeezing_examples() {
        let q = thermal_dist(1.0, 20).unwrap();
        assert_eq!(
            number_squeezing_db(&twin_beam_joint(&q)).unwrap(),
            f64::NEG_INFINITY
        );

        let p2 = poisson_dist(2.0, 40).unwrap();
        let s = number_squeezing_db(&JointPhotonDistribution::product(&p2, &p2)).unwrap();
        assert!(s.abs() < 1e-6, "{s}");

        let p05 = poisson_dist(0.5, 30).unwrap();
        let s = number_squeezing_db(&JointPhotonDistribution::product(&p05, &p05)).unwrap();
        assert!((s - 10.0 * 4.0f64.log10()).abs() < 1e-6, "{s}");

        // Independent Poissonians sit exactly at the shot-noise level.
        let r = noise_reduction_db(&JointPhotonDistribution::product(&p05, &p05)).unwrap();
        assert!(r.abs() < 1e-6, "{r}");

        let err = number_squeezing_db(&JointPhotonDistribution::vacuum(2)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn golden_section_iteration_cap() {
        let err = golden_section(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-9, 3).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        let (x, _) = golden_section(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-9, 200).unwrap();
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn self_fits() {
        let p = poisson_dist(1.0, 30).unwrap();
        let fit = fit_poisson(&p).unwrap();
        assert!((fit.mean - 1.0).abs() < 1e-6);
        assert!(fit.residual_l2 < 1e-9, "{}", fit.residual_l2);

        let t = thermal_dist(0.5, 30).unwrap();
        let fit = fit_thermal(&t).unwrap();
        assert!((fit.mean - 0.5).abs() < 1e-6);
        assert!(fit.residual_l2 < 1e-9, "{}", fit.residual_l2);
        assert_eq!(fit.per_bin_deviation.len(), 31);
    }

    #[test]
    fn vacuum_fit_goes_to_zero_mean() {
        let fit = fit_poisson(&PhotonDistribution::vacuum(10)).unwrap();
        assert!(fit.mean < 1e-8);
        assert!(fit.residual_l2 < 1e-8);
    }
}
