//! Probability vectors over photon and click numbers.
//!
//! Photon-number distributions are indexed by `n = 0..=n_max`, joint
//! distributions by `(n, m)` with the signal photon number on the row axis
//! and the idler photon number on the column axis. Click statistics use the
//! same layout with click counts `c = 0..=K` in place of photon numbers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries of every distribution sum to one within this tolerance.
pub const NORM_TOL: f64 = 1e-9;

/// Reconstructed probabilities down to `-TOL_NEG` are attributed to
/// inversion noise; anything more negative marks the result non-physical.
pub const TOL_NEG: f64 = 1e-3;

/// Default photon-number truncation for a distribution of mean `mean`:
/// `ceil(mean + 15 * sqrt(mean * (1 + mean)))`, never below 10.
pub fn default_truncation(mean: f64) -> usize {
    let mean = mean.max(0.0);
    let bound = (mean + 15.0 * (mean * (1.0 + mean)).sqrt()).ceil();
    (bound as usize).max(10)
}

/// Which arm of a two-beam measurement an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Signal,
    Idler,
}

fn check_normalized(what: &str, sum: f64) -> Result<()> {
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(Error::domain(format!(
            "{what} entries sum to {sum}, expected 1 within {NORM_TOL:e}"
        )));
    }
    Ok(())
}

fn check_finite<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{what} contains non-finite entries")));
    }
    Ok(())
}

/// Probability `p_n` of finding `n` photons, truncated at `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct PhotonDistribution {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    probs: Vec<f64>,
}

impl TryFrom<DistributionRepr> for PhotonDistribution {
    type Error = Error;
    fn try_from(r: DistributionRepr) -> Result<Self> {
        PhotonDistribution::new(r.probs)
    }
}

impl From<PhotonDistribution> for DistributionRepr {
    fn from(d: PhotonDistribution) -> Self {
        DistributionRepr { probs: d.probs }
    }
}

impl PhotonDistribution {
    /// Wraps a probability vector. Entries must be finite and sum to one;
    /// small negative entries are accepted (see [`Self::is_physical`]).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("photon distribution must have at least one entry"));
        }
        check_finite("photon distribution", &probs)?;
        check_normalized("photon distribution", probs.iter().sum())?;
        Ok(Self { probs })
    }

    /// Divides `weights` by their sum.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("photon distribution must have at least one entry"));
        }
        check_finite("weights", &weights)?;
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Degenerate(format!("weights sum to {total}")));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { probs })
    }

    pub fn vacuum(n_max: usize) -> Self {
        Self::fock(0, n_max)
    }

    /// All probability on `n` photons, truncated at `max(n, n_max)`.
    pub fn fock(n: usize, n_max: usize) -> Self {
        let mut probs = vec![0.0; n_max.max(n) + 1];
        probs[n] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `p_n`, zero beyond the truncation.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean).powi(2) * p)
            .sum()
    }

    /// True when no entry is below `-TOL_NEG`.
    pub fn is_physical(&self) -> bool {
        self.probs.iter().all(|&p| p >= -TOL_NEG)
    }

    /// Same distribution with the truncation raised to `n_max` (zero padded).
    pub fn padded(&self, n_max: usize) -> Result<Self> {
        if n_max < self.n_max() {
            return Err(Error::domain(format!(
                "cannot pad a distribution with n_max = {} down to {n_max}",
                self.n_max()
            )));
        }
        let mut probs = self.probs.clone();
        probs.resize(n_max + 1, 0.0);
        Ok(Self { probs })
    }

    /// Sum of `|p_n - q_n| / 2` over the union of both supports.
    pub fn total_variation(&self, other: &PhotonDistribution) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        0.5 * (0..len).map(|n| (self.get(n) - other.get(n)).abs()).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &PhotonDistribution) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        (0..len)
            .map(|n| (self.get(n) - other.get(n)).abs())
            .fold(0.0, f64::max)
    }
}

/// Joint probability `p_{n,m}` of `n` signal and `m` idler photons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointPhotonDistribution {
    probs: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    probs: Vec<Vec<f64>>,
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::domain("joint distribution must be non-empty"));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::domain("joint distribution rows have unequal lengths"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl TryFrom<JointRepr> for JointPhotonDistribution {
    type Error = Error;
    fn try_from(r: JointRepr) -> Result<Self> {
        JointPhotonDistribution::new(matrix_from_rows(r.probs)?)
    }
}

impl From<JointPhotonDistribution> for JointRepr {
    fn from(d: JointPhotonDistribution) -> Self {
        JointRepr {
            probs: matrix_to_rows(&d.probs),
        }
    }
}

impl JointPhotonDistribution {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("joint distribution must be non-empty"));
        }
        check_finite("joint distribution", probs.iter())?;
        check_normalized("joint distribution", probs.sum())?;
        Ok(Self { probs })
    }

    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("joint distribution must be non-empty"));
        }
        check_finite("joint weights", weights.iter())?;
        let total = weights.sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Degenerate(format!("joint weights sum to {total}")));
        }
        Ok(Self {
            probs: weights / total,
        })
    }

    /// `p_{n,m} = a_n b_m`.
    pub fn product(signal: &PhotonDistribution, idler: &PhotonDistribution) -> Self {
        let probs = DMatrix::from_fn(signal.n_max() + 1, idler.n_max() + 1, |n, m| {
            signal.get(n) * idler.get(m)
        });
        Self { probs }
    }

    pub fn vacuum(n_max: usize) -> Self {
        let mut probs = DMatrix::zeros(n_max + 1, n_max + 1);
        probs[(0, 0)] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        if n < self.probs.nrows() && m < self.probs.ncols() {
            self.probs[(n, m)]
        } else {
            0.0
        }
    }

    pub fn n_max_signal(&self) -> usize {
        self.probs.nrows() - 1
    }

    pub fn n_max_idler(&self) -> usize {
        self.probs.ncols() - 1
    }

    pub fn is_physical(&self) -> bool {
        self.probs.iter().all(|&p| p >= -TOL_NEG)
    }

    pub fn max_abs_diff(&self, other: &JointPhotonDistribution) -> f64 {
        let rows = self.probs.nrows().max(other.probs.nrows());
        let cols = self.probs.ncols().max(other.probs.ncols());
        let mut worst = 0.0f64;
        for n in 0..rows {
            for m in 0..cols {
                worst = worst.max((self.get(n, m) - other.get(n, m)).abs());
            }
        }
        worst
    }
}

/// Observed click-number histogram of one detector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ClickRepr", into = "ClickRepr")]
pub struct ClickStatistics {
    counts: Vec<u64>,
    total_shots: u64,
}

#[derive(Serialize, Deserialize)]
struct ClickRepr {
    counts: Vec<u64>,
    total_shots: u64,
}

impl TryFrom<ClickRepr> for ClickStatistics {
    type Error = Error;
    fn try_from(r: ClickRepr) -> Result<Self> {
        let stats = ClickStatistics::new(r.counts)?;
        if stats.total_shots != r.total_shots {
            return Err(Error::data(
                None,
                format!(
                    "counts sum to {} but total_shots is {}",
                    stats.total_shots, r.total_shots
                ),
            ));
        }
        Ok(stats)
    }
}

impl From<ClickStatistics> for ClickRepr {
    fn from(s: ClickStatistics) -> Self {
        ClickRepr {
            counts: s.counts,
            total_shots: s.total_shots,
        }
    }
}

impl ClickStatistics {
    /// `counts[c]` is the number of shots with exactly `c` clicked bins.
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::data(None, "click histogram has no bins"));
        }
        let total_shots: u64 = counts.iter().sum();
        if total_shots == 0 {
            return Err(Error::data(None, "no shots"));
        }
        Ok(Self {
            counts,
            total_shots,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    /// Largest representable click number `K`.
    pub fn bins(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn frequencies(&self) -> ClickDistribution {
        let n = self.total_shots as f64;
        ClickDistribution {
            probs: self.counts.iter().map(|&c| c as f64 / n).collect(),
            shots: Some(self.total_shots),
        }
    }
}

/// Observed joint click histogram of two detectors, signal clicks on rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "JointClickRepr", into = "JointClickRepr")]
pub struct JointClickStatistics {
    counts: DMatrix<u64>,
    total_shots: u64,
}

#[derive(Serialize, Deserialize)]
struct JointClickRepr {
    counts: Vec<Vec<u64>>,
    total_shots: u64,
}

impl TryFrom<JointClickRepr> for JointClickStatistics {
    type Error = Error;
    fn try_from(r: JointClickRepr) -> Result<Self> {
        let nrows = r.counts.len();
        let ncols = r.counts.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 || r.counts.iter().any(|row| row.len() != ncols) {
            return Err(Error::data(None, "joint click histogram must be a non-empty rectangle"));
        }
        let stats =
            JointClickStatistics::new(DMatrix::from_fn(nrows, ncols, |i, j| r.counts[i][j]))?;
        if stats.total_shots != r.total_shots {
            return Err(Error::data(
                None,
                format!(
                    "counts sum to {} but total_shots is {}",
                    stats.total_shots, r.total_shots
                ),
            ));
        }
        Ok(stats)
    }
}

impl From<JointClickStatistics> for JointClickRepr {
    fn from(s: JointClickStatistics) -> Self {
        JointClickRepr {
            counts: matrix_to_rows(&s.counts),
            total_shots: s.total_shots,
        }
    }
}

impl JointClickStatistics {
    pub fn new(counts: DMatrix<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::data(None, "joint click histogram has no bins"));
        }
        let total_shots: u64 = counts.iter().sum();
        if total_shots == 0 {
            return Err(Error::data(None, "no shots"));
        }
        Ok(Self {
            counts,
            total_shots,
        })
    }

    pub fn counts(&self) -> &DMatrix<u64> {
        &self.counts
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn signal_bins(&self) -> usize {
        self.counts.nrows() - 1
    }

    pub fn idler_bins(&self) -> usize {
        self.counts.ncols() - 1
    }

    pub fn signal_marginal(&self) -> ClickStatistics {
        let counts = (0..self.counts.nrows())
            .map(|i| self.counts.row(i).iter().sum())
            .collect();
        ClickStatistics {
            counts,
            total_shots: self.total_shots,
        }
    }

    pub fn idler_marginal(&self) -> ClickStatistics {
        let counts = (0..self.counts.ncols())
            .map(|j| self.counts.column(j).iter().sum())
            .collect();
        ClickStatistics {
            counts,
            total_shots: self.total_shots,
        }
    }

    /// Idler click histogram restricted to shots where the signal detector
    /// registered `signal_clicks` clicks.
    pub fn idler_given_signal(&self, signal_clicks: impl Fn(usize) -> bool) -> Result<ClickStatistics> {
        let counts: Vec<u64> = (0..self.counts.ncols())
            .map(|j| {
                (0..self.counts.nrows())
                    .filter(|&i| signal_clicks(i))
                    .map(|i| self.counts[(i, j)])
                    .sum()
            })
            .collect();
        ClickStatistics::new(counts)
    }

    pub fn frequencies(&self) -> JointClickDistribution {
        let n = self.total_shots as f64;
        JointClickDistribution {
            probs: self.counts.map(|c| c as f64 / n),
            shots: Some(self.total_shots),
        }
    }

    /// Element-wise sum of two histograms of equal shape.
    pub fn merge(&self, other: &JointClickStatistics) -> Result<JointClickStatistics> {
        if self.counts.shape() != other.counts.shape() {
            return Err(Error::data(None, "cannot merge joint histograms of different shape"));
        }
        Ok(JointClickStatistics {
            counts: &self.counts + &other.counts,
            total_shots: self.total_shots + other.total_shots,
        })
    }
}

/// Click-number probabilities of one detector, either exact (model output)
/// or estimated from `shots` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickDistribution {
    probs: Vec<f64>,
    shots: Option<u64>,
}

impl ClickDistribution {
    /// Exact click probabilities (infinite-shot limit).
    pub fn exact(probs: Vec<f64>) -> Result<Self> {
        Self::with_shots(probs, None)
    }

    pub fn with_shots(probs: Vec<f64>, shots: Option<u64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("click distribution must have at least one entry"));
        }
        check_finite("click distribution", &probs)?;
        check_normalized("click distribution", probs.iter().sum())?;
        Ok(Self { probs, shots })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    pub fn bins(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn get(&self, c: usize) -> f64 {
        self.probs.get(c).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(c, p)| c as f64 * p).sum()
    }
}

/// Joint click probabilities of two detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct JointClickDistribution {
    probs: DMatrix<f64>,
    shots: Option<u64>,
}

impl JointClickDistribution {
    pub fn exact(probs: DMatrix<f64>) -> Result<Self> {
        Self::with_shots(probs, None)
    }

    pub fn with_shots(probs: DMatrix<f64>, shots: Option<u64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("joint click distribution must be non-empty"));
        }
        check_finite("joint click distribution", probs.iter())?;
        check_normalized("joint click distribution", probs.sum())?;
        Ok(Self { probs, shots })
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    pub fn get(&self, c: usize, d: usize) -> f64 {
        if c < self.probs.nrows() && d < self.probs.ncols() {
            self.probs[(c, d)]
        } else {
            0.0
        }
    }

    pub fn signal_marginal(&self) -> ClickDistribution {
        ClickDistribution {
            probs: (0..self.probs.nrows()).map(|i| self.probs.row(i).sum()).collect(),
            shots: self.shots,
        }
    }

    pub fn idler_marginal(&self) -> ClickDistribution {
        ClickDistribution {
            probs: (0..self.probs.ncols()).map(|j| self.probs.column(j).sum()).collect(),
            shots: self.shots,
        }
    }

    /// Reads click numbers as if they were photon numbers, for raw-data
    /// figures of merit.
    pub fn as_joint_distribution(&self) -> JointPhotonDistribution {
        JointPhotonDistribution {
            probs: self.probs.clone(),
        }
    }
}
