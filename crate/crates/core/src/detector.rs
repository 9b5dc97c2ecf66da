//! Forward model of a time-multiplexed click detector.
//!
//! A pulse carrying `m` photons first passes a binomial loss channel
//! (matrix `L(eta)`, surviving photon number on the rows), then the
//! surviving photons are scattered independently over `K` time bins with
//! occupation probabilities `P_k`; each occupied bin yields one click
//! (matrix `C`, click number on the rows). The observable click
//! distribution is `C L(eta) p`.
//!
//! All matrices are column-stochastic: column `j` is the distribution of
//! the output given input `j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{
    Axis, ClickDistribution, JointClickDistribution, JointPhotonDistribution, PhotonDistribution,
};
use crate::error::{Error, Result};

/// Default number of time bins of the multiplexed detector.
pub const DEFAULT_BINS: usize = 8;
/// Bin counts above this are refused by the subset enumeration in
/// [`convolution_matrix`].
pub const MAX_BINS: usize = 20;

const BIN_SUM_TOL: f64 = 1e-12;

/// Validates occupation probabilities of the time bins.
pub fn validate_bin_probs(bin_probs: &[f64]) -> Result<()> {
    if bin_probs.is_empty() {
        return Err(Error::domain("bin_probs must contain at least one bin"));
    }
    if bin_probs.len() > MAX_BINS {
        return Err(Error::Complexity {
            bins: bin_probs.len(),
            limit: MAX_BINS,
        });
    }
    if bin_probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::domain("bin_probs entries must be finite and non-negative"));
    }
    let sum: f64 = bin_probs.iter().sum();
    if (sum - 1.0).abs() > BIN_SUM_TOL {
        return Err(Error::domain(format!("bin_probs sum to {sum}, expected 1")));
    }
    Ok(())
}

pub fn uniform_bins(bins: usize) -> Vec<f64> {
    vec![1.0 / bins as f64; bins]
}

fn check_efficiency(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("efficiency must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// Full description of one time-multiplexed detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmdConfig {
    bin_probs: Vec<f64>,
    efficiency: f64,
    n_max: usize,
}

impl TmdConfig {
    pub fn new(bin_probs: Vec<f64>, efficiency: f64, n_max: usize) -> Result<Self> {
        validate_bin_probs(&bin_probs)?;
        check_efficiency(efficiency)?;
        Ok(Self {
            bin_probs,
            efficiency,
            n_max,
        })
    }

    /// `bins` equally populated time bins.
    pub fn uniform(bins: usize, efficiency: f64, n_max: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::domain("a detector needs at least one time bin"));
        }
        Self::new(uniform_bins(bins), efficiency, n_max)
    }

    pub fn bin_probs(&self) -> &[f64] {
        &self.bin_probs
    }

    /// Number of time bins `K`.
    pub fn bins(&self) -> usize {
        self.bin_probs.len()
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn with_efficiency(&self, efficiency: f64) -> Result<Self> {
        Self::new(self.bin_probs.clone(), efficiency, self.n_max)
    }

    pub fn with_n_max(&self, n_max: usize) -> Self {
        Self {
            n_max,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Loss,
    Convolution,
    Composite,
}

/// Column-stochastic map from a true count (column) to an observed count
/// (row).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorMatrix {
    entries: DMatrix<f64>,
    kind: MatrixKind,
}

impl DetectorMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// Largest deviation of a column sum from one.
    pub fn stochasticity_error(&self) -> f64 {
        self.entries
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `self * rhs`, e.g. `C * L`.
    pub fn compose(&self, rhs: &DetectorMatrix) -> Result<DetectorMatrix> {
        if self.entries.ncols() != rhs.entries.nrows() {
            return Err(Error::domain(format!(
                "cannot compose {}x{} with {}x{}",
                self.entries.nrows(),
                self.entries.ncols(),
                rhs.entries.nrows(),
                rhs.entries.ncols()
            )));
        }
        Ok(DetectorMatrix {
            entries: &self.entries * &rhs.entries,
            kind: MatrixKind::Composite,
        })
    }
}

pub(crate) fn binomial(m: usize, n: usize) -> f64 {
    if n > m {
        return 0.0;
    }
    let n = n.min(m - n);
    (1..=n).fold(1.0, |acc, i| acc * (m - n + i) as f64 / i as f64)
}

/// Binomial loss `L_{n,m} = C(m, n) eta^n (1 - eta)^(m - n)`, square of
/// size `n_max + 1`.
pub fn loss_matrix(eta: f64, n_max: usize) -> Result<DetectorMatrix> {
    check_efficiency(eta)?;
    let size = n_max + 1;
    let entries = DMatrix::from_fn(size, size, |n, m| {
        if n > m {
            0.0
        } else {
            binomial(m, n) * eta.powi(n as i32) * (1.0 - eta).powi((m - n) as i32)
        }
    });
    Ok(DetectorMatrix {
        entries,
        kind: MatrixKind::Loss,
    })
}

/// Probability `C_{c,n}` that `n` photons, each placed independently into
/// bin `k` with probability `P_k`, occupy exactly `c` distinct bins.
///
/// Evaluated by inclusion-exclusion over bin subsets `T`:
/// `C_{c,n} = sum_T (-1)^(c - |T|) C(K - |T|, c - |T|) P(T)^n`, where
/// `P(T)` is the total occupation probability of `T`. The result has
/// `K + 1` rows and `n_max + 1` columns.
pub fn convolution_matrix(bin_probs: &[f64], n_max: usize) -> Result<DetectorMatrix> {
    validate_bin_probs(bin_probs)?;
    let bins = bin_probs.len();

    // power_sums[t][n] = sum over subsets of size t of P(T)^n
    let mut power_sums = vec![vec![0.0f64; n_max + 1]; bins + 1];
    for subset in 0u32..(1u32 << bins) {
        let size = subset.count_ones() as usize;
        let weight: f64 = (0..bins)
            .filter(|k| subset & (1 << k) != 0)
            .map(|k| bin_probs[k])
            .sum();
        let mut power = 1.0;
        for n in 0..=n_max {
            power_sums[size][n] += power;
            power *= weight;
        }
    }

    let mut entries = DMatrix::zeros(bins + 1, n_max + 1);
    for n in 0..=n_max {
        // n photons cannot light more than n bins
        for c in 0..=bins.min(n) {
            let mut acc = 0.0;
            for t in 0..=c {
                let sign = if (c - t) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binomial(bins - t, c - t) * power_sums[t][n];
            }
            entries[(c, n)] = acc.clamp(0.0, 1.0);
        }
    }
    Ok(DetectorMatrix {
        entries,
        kind: MatrixKind::Convolution,
    })
}

/// Loss, convolution and composite matrices of one detector, built once.
#[derive(Debug, Clone)]
pub struct DetectorModel {
    config: TmdConfig,
    loss: DetectorMatrix,
    convolution: DetectorMatrix,
    composite: DetectorMatrix,
}

impl DetectorModel {
    pub fn new(config: &TmdConfig) -> Result<Self> {
        let loss = loss_matrix(config.efficiency(), config.n_max())?;
        let convolution = convolution_matrix(config.bin_probs(), config.n_max())?;
        let composite = convolution.compose(&loss)?;
        Ok(Self {
            config: config.clone(),
            loss,
            convolution,
            composite,
        })
    }

    pub fn config(&self) -> &TmdConfig {
        &self.config
    }

    pub fn loss(&self) -> &DetectorMatrix {
        &self.loss
    }

    pub fn convolution(&self) -> &DetectorMatrix {
        &self.convolution
    }

    /// `C L(eta)`, `(K + 1) x (n_max + 1)`.
    pub fn composite(&self) -> &DetectorMatrix {
        &self.composite
    }

    fn padded_input(&self, p: &PhotonDistribution) -> Result<DVector<f64>> {
        if p.n_max() > self.config.n_max() {
            return Err(Error::domain(format!(
                "input truncation n_max = {} exceeds detector n_max = {}",
                p.n_max(),
                self.config.n_max()
            )));
        }
        Ok(DVector::from_fn(self.config.n_max() + 1, |n, _| p.get(n)))
    }

    pub fn forward(&self, p: &PhotonDistribution) -> Result<ClickDistribution> {
        let input = self.padded_input(p)?;
        let out = self.convolution.entries() * (self.loss.entries() * input);
        ClickDistribution::exact(out.iter().copied().collect())
    }
}

/// Click distribution `C L(eta) p` of a single detector.
pub fn forward(tmd: &TmdConfig, p: &PhotonDistribution) -> Result<ClickDistribution> {
    DetectorModel::new(tmd)?.forward(p)
}

fn padded_joint(joint: &JointPhotonDistribution, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if joint.n_max_signal() + 1 > rows || joint.n_max_idler() + 1 > cols {
        return Err(Error::domain(format!(
            "joint truncation ({}, {}) exceeds detector truncation ({}, {})",
            joint.n_max_signal(),
            joint.n_max_idler(),
            rows - 1,
            cols - 1
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |n, m| joint.get(n, m)))
}

/// Joint click distribution of two independent detectors,
/// `(C_s L_s) P (C_i L_i)^T`.
pub fn joint_forward(
    tmd_s: &TmdConfig,
    tmd_i: &TmdConfig,
    joint: &JointPhotonDistribution,
) -> Result<JointClickDistribution> {
    let signal = DetectorModel::new(tmd_s)?;
    let idler = DetectorModel::new(tmd_i)?;
    let p = padded_joint(joint, tmd_s.n_max() + 1, tmd_i.n_max() + 1)?;
    let out = signal.composite().entries() * p * idler.composite().entries().transpose();
    JointClickDistribution::exact(out)
}

/// Applies independent binomial loss `eta` to one arm of a joint
/// distribution.
pub fn apply_loss(joint: &JointPhotonDistribution, axis: Axis, eta: f64) -> Result<JointPhotonDistribution> {
    let p = joint.probs();
    let out = match axis {
        Axis::Signal => loss_matrix(eta, joint.n_max_signal())?.entries() * p,
        Axis::Idler => p * loss_matrix(eta, joint.n_max_idler())?.entries().transpose(),
    };
    JointPhotonDistribution::new(out)
}

/// Click distribution of a single detector fed with both beams.
///
/// Each arm suffers its own loss (`eta_s`, `eta_i`) before the beams merge;
/// `tmd.efficiency()` is not used. The merged photon number must fit into
/// `tmd.n_max()`.
pub fn collective_forward(
    tmd: &TmdConfig,
    joint: &JointPhotonDistribution,
    eta_s: f64,
    eta_i: f64,
) -> Result<ClickDistribution> {
    let combined_n_max = joint.n_max_signal() + joint.n_max_idler();
    if combined_n_max > tmd.n_max() {
        return Err(Error::domain(format!(
            "merged photon number reaches {combined_n_max} but detector n_max = {}",
            tmd.n_max()
        )));
    }
    let lossy = apply_loss(&apply_loss(joint, Axis::Signal, eta_s)?, Axis::Idler, eta_i)?;
    let merged = crate::stats::combine_collective(&lossy).padded(tmd.n_max())?;
    let conv = convolution_matrix(tmd.bin_probs(), tmd.n_max())?;
    let out = conv.entries() * DVector::from_column_slice(merged.probs());
    ClickDistribution::exact(out.iter().copied().collect())
}
