//! Shot-by-shot simulation of a pair source feeding click detectors.
//!
//! Every shot draws a pair number, thins each arm binomially, and drops each
//! surviving photon into a time bin; a bin clicks iff it received a photon.
//! Shots are grouped into shards of [`SHARD_SIZE`]; shard `s` draws from a
//! ChaCha8 generator seeded with the experiment seed on stream `s`, so the
//! shot stream depends only on `(config, seed)` and not on how shards are
//! scheduled across threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{uniform_bins, validate_bin_probs, TmdConfig, DEFAULT_BINS};
use crate::dist::{ClickStatistics, JointClickStatistics};
use crate::error::{Error, Result};
use crate::reconstruct::{klyshko_from_counts, CalibrationRecord};
use crate::sources::SourceModel;

/// Shots simulated from one generator stream.
pub const SHARD_SIZE: u64 = 1 << 16;

/// Measurement configuration of the two beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setup {
    /// Threshold detector on each arm; only events are analyzed.
    A,
    /// Multiplexed detector on the idler arm, threshold detector on the
    /// signal arm.
    B,
    /// Both arms merged into one multiplexed detector.
    C,
    /// Multiplexed detector on each arm.
    D,
}

impl std::str::FromStr for Setup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Setup::A),
            "B" => Ok(Setup::B),
            "C" => Ok(Setup::C),
            "D" => Ok(Setup::D),
            _ => Err(Error::domain(format!("unknown setup {s:?}, expected A, B, C or D"))),
        }
    }
}

impl std::fmt::Display for Setup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Setup::A => "A",
            Setup::B => "B",
            Setup::C => "C",
            Setup::D => "D",
        };
        f.write_str(s)
    }
}

/// Time-bin layout and efficiency of one detector; a single bin is a
/// threshold detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    bin_probs: Vec<f64>,
    efficiency: f64,
}

impl DetectorSpec {
    pub fn new(bin_probs: Vec<f64>, efficiency: f64) -> Result<Self> {
        validate_bin_probs(&bin_probs)?;
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::domain(format!("efficiency must lie in [0, 1], got {efficiency}")));
        }
        Ok(Self {
            bin_probs,
            efficiency,
        })
    }

    pub fn threshold(efficiency: f64) -> Result<Self> {
        Self::new(vec![1.0], efficiency)
    }

    pub fn uniform(bins: usize, efficiency: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::domain("a detector needs at least one time bin"));
        }
        Self::new(uniform_bins(bins), efficiency)
    }

    /// Default multiplexed detector with [`DEFAULT_BINS`] equal bins.
    pub fn tmd(efficiency: f64) -> Result<Self> {
        Self::uniform(DEFAULT_BINS, efficiency)
    }

    pub fn bin_probs(&self) -> &[f64] {
        &self.bin_probs
    }

    pub fn bins(&self) -> usize {
        self.bin_probs.len()
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    /// Model of this detector for photon numbers up to `n_max`.
    pub fn tmd_config(&self, n_max: usize) -> Result<TmdConfig> {
        TmdConfig::new(self.bin_probs.clone(), self.efficiency, n_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceModel,
    pub setup: Setup,
    /// Signal detector; in setup C only its efficiency is used.
    pub signal: DetectorSpec,
    /// Idler detector; in setup C only its efficiency is used.
    pub idler: DetectorSpec,
    /// Bins of the shared detector in setup C.
    pub collective_bins: Option<Vec<f64>>,
    pub shots: u64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::domain("shots must be at least 1"));
        }
        // A multiplexed detector read out as click/no-click is a threshold
        // detector, so setups A and B accept any bin layout.
        if self.setup == Setup::C {
            match &self.collective_bins {
                Some(bins) => validate_bin_probs(bins)?,
                None => return Err(Error::domain("setup C needs the bins of the shared detector")),
            }
        }
        if self.setup != Setup::C && self.collective_bins.is_some() {
            return Err(Error::domain("a shared detector is only used in setup C"));
        }
        Ok(())
    }

    /// Shape of the click histogram: signal clicks on rows, idler clicks on
    /// columns; setup C stores the shared detector's clicks on the rows.
    pub fn histogram_shape(&self) -> (usize, usize) {
        match (&self.setup, &self.collective_bins) {
            (Setup::C, Some(bins)) => (bins.len() + 1, 1),
            _ => (self.signal.bins() + 1, self.idler.bins() + 1),
        }
    }
}

/// One detection event. Bit `k` of a mask is set iff bin `k` clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShotRecord {
    pub shot_id: u64,
    pub signal_mask: u32,
    pub idler_mask: u32,
}

impl ShotRecord {
    pub fn signal_clicks(&self) -> usize {
        self.signal_mask.count_ones() as usize
    }

    pub fn idler_clicks(&self) -> usize {
        self.idler_mask.count_ones() as usize
    }
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

/// Index drawn from the categorical distribution with cumulative weights
/// `cdf`; rounding slack at the top falls into the last populated entry.
fn draw_index(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("non-empty");
    let u = u * total;
    cdf.iter().position(|&c| u < c).unwrap_or_else(|| {
        let top = cdf.len() - 1;
        (0..=top).rev().find(|&i| i == 0 || cdf[i] > cdf[i - 1]).unwrap_or(top)
    })
}

#[derive(Debug, Clone)]
struct ArmSampler {
    efficiency: f64,
    bin_cdf: Vec<f64>,
}

impl ArmSampler {
    fn new(efficiency: f64, bin_probs: &[f64]) -> Self {
        Self {
            efficiency,
            bin_cdf: cumulative(bin_probs),
        }
    }

    fn survivors<R: Rng>(&self, photons: usize, rng: &mut R) -> usize {
        (0..photons).filter(|_| rng.random_bool(self.efficiency)).count()
    }

    fn place<R: Rng>(&self, photons: usize, rng: &mut R) -> u32 {
        let mut mask = 0u32;
        for _ in 0..photons {
            mask |= 1 << draw_index(&self.bin_cdf, rng.random::<f64>());
        }
        mask
    }
}

/// Pre-processed experiment description for drawing shots.
#[derive(Debug, Clone)]
pub struct ShotSampler {
    pair_cdf: Vec<f64>,
    twin: bool,
    signal: ArmSampler,
    idler: ArmSampler,
    shared: Option<Vec<f64>>,
    shape: (usize, usize),
}

impl ShotSampler {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (twin, dist) = match &config.source {
            SourceModel::TwinBeam { pair_dist } => (true, pair_dist),
            SourceModel::SingleBeam { dist } => (false, dist),
        };
        let probs: Vec<f64> = dist.probs().iter().map(|p| p.max(0.0)).collect();
        Ok(Self {
            pair_cdf: cumulative(&probs),
            twin,
            signal: ArmSampler::new(config.signal.efficiency(), config.signal.bin_probs()),
            idler: ArmSampler::new(config.idler.efficiency(), config.idler.bin_probs()),
            shared: match config.setup {
                Setup::C => config.collective_bins.as_deref().map(cumulative),
                _ => None,
            },
            shape: config.histogram_shape(),
        })
    }

    pub fn histogram_shape(&self) -> (usize, usize) {
        self.shape
    }
}

/// Simulates one shot.
pub fn sample_shot<R: Rng>(sampler: &ShotSampler, shot_id: u64, rng: &mut R) -> ShotRecord {
    let n = draw_index(&sampler.pair_cdf, rng.random::<f64>());
    let s = sampler.signal.survivors(n, rng);
    let i = if sampler.twin { sampler.idler.survivors(n, rng) } else { 0 };
    match &sampler.shared {
        Some(cdf) => {
            let mut mask = 0u32;
            for _ in 0..s + i {
                mask |= 1 << draw_index(cdf, rng.random::<f64>());
            }
            ShotRecord {
                shot_id,
                signal_mask: mask,
                idler_mask: 0,
            }
        }
        None => ShotRecord {
            shot_id,
            signal_mask: sampler.signal.place(s, rng),
            idler_mask: sampler.idler.place(i, rng),
        },
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

fn shard_len(shots: u64, shard: u64) -> u64 {
    (shots - shard * SHARD_SIZE).min(SHARD_SIZE)
}

/// The shots of an experiment in order of `shot_id`.
pub fn shot_stream(config: &ExperimentConfig) -> Result<impl Iterator<Item = ShotRecord>> {
    let sampler = ShotSampler::new(config)?;
    let (shots, seed) = (config.shots, config.seed);
    Ok((0..shots.div_ceil(SHARD_SIZE)).flat_map(move |shard| {
        let sampler = sampler.clone();
        let mut rng = shard_rng(seed, shard);
        (0..shard_len(shots, shard)).map(move |j| sample_shot(&sampler, shard * SHARD_SIZE + j, &mut rng))
    }))
}

/// Accumulates shots into a click-number histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotCounter {
    counts: DMatrix<u64>,
}

impl ShotCounter {
    pub fn new((rows, cols): (usize, usize)) -> Self {
        Self {
            counts: DMatrix::zeros(rows, cols),
        }
    }

    pub fn add(&mut self, shot: &ShotRecord) -> Result<()> {
        let (c, d) = (shot.signal_clicks(), shot.idler_clicks());
        if c >= self.counts.nrows() || d >= self.counts.ncols() {
            return Err(Error::data(
                None,
                format!("shot {} has more clicks than the detectors have bins", shot.shot_id),
            ));
        }
        self.counts[(c, d)] += 1;
        Ok(())
    }

    fn merge(mut self, other: ShotCounter) -> ShotCounter {
        self.counts += other.counts;
        self
    }

    pub fn finish(self) -> Result<JointClickStatistics> {
        JointClickStatistics::new(self.counts)
    }
}

/// Aggregated result of a simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub setup: Setup,
    /// Click histogram with the layout of
    /// [`ExperimentConfig::histogram_shape`].
    pub clicks: JointClickStatistics,
}

/// Event counts of threshold-style detection: an arm registers an event
/// when at least one of its bins clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub shots: u64,
    pub signal_singles: u64,
    pub idler_singles: u64,
    pub coincidences: u64,
}

impl EventCounts {
    pub fn from_histogram(clicks: &JointClickStatistics) -> Self {
        let counts = clicks.counts();
        let mut out = EventCounts {
            shots: clicks.total_shots(),
            signal_singles: 0,
            idler_singles: 0,
            coincidences: 0,
        };
        for c in 0..counts.nrows() {
            for d in 0..counts.ncols() {
                let k = counts[(c, d)];
                if c > 0 {
                    out.signal_singles += k;
                }
                if d > 0 {
                    out.idler_singles += k;
                }
                if c > 0 && d > 0 {
                    out.coincidences += k;
                }
            }
        }
        out
    }

    /// Per-shot rates `(signal singles, idler singles, coincidences)`.
    pub fn rates(&self) -> (f64, f64, f64) {
        let n = self.shots as f64;
        (
            self.signal_singles as f64 / n,
            self.idler_singles as f64 / n,
            self.coincidences as f64 / n,
        )
    }
}

impl ExperimentOutcome {
    pub fn signal_clicks(&self) -> ClickStatistics {
        self.clicks.signal_marginal()
    }

    pub fn idler_clicks(&self) -> ClickStatistics {
        self.clicks.idler_marginal()
    }

    pub fn events(&self) -> EventCounts {
        EventCounts::from_histogram(&self.clicks)
    }
}

/// Simulates `config.shots` shots, sharded over the rayon thread pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let sampler = ShotSampler::new(config)?;
    let shape = sampler.histogram_shape();
    let (shots, seed) = (config.shots, config.seed);
    let counter = (0..shots.div_ceil(SHARD_SIZE))
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(seed, shard);
            let mut counter = ShotCounter::new(shape);
            for j in 0..shard_len(shots, shard) {
                let shot = sample_shot(&sampler, shard * SHARD_SIZE + j, &mut rng);
                counter.add(&shot).expect("masks fit the configured bins");
            }
            counter
        })
        .reduce(|| ShotCounter::new(shape), ShotCounter::merge);
    Ok(ExperimentOutcome {
        setup: config.setup,
        clicks: counter.finish()?,
    })
}

/// Efficiency estimates of both arms from a threshold-detector experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlyshkoCalibration {
    pub events: EventCounts,
    /// Heralded by idler events; `None` when the idler never fired.
    pub signal: Option<CalibrationRecord>,
    /// Heralded by signal events; `None` when the signal never fired.
    pub idler: Option<CalibrationRecord>,
}

impl KlyshkoCalibration {
    pub fn from_events(events: EventCounts) -> Self {
        Self {
            events,
            signal: klyshko_from_counts(events.coincidences, events.idler_singles).ok(),
            idler: klyshko_from_counts(events.coincidences, events.signal_singles).ok(),
        }
    }

    pub fn signal(&self) -> Result<&CalibrationRecord> {
        self.signal
            .as_ref()
            .ok_or_else(|| Error::Degenerate("no idler events to herald the signal efficiency".into()))
    }

    pub fn idler(&self) -> Result<&CalibrationRecord> {
        self.idler
            .as_ref()
            .ok_or_else(|| Error::Degenerate("no signal events to herald the idler efficiency".into()))
    }
}

/// Runs setup A and derives the efficiency of each arm from the
/// coincidences heralded by the other arm.
pub fn simulate_klyshko(
    source: &SourceModel,
    eta_s: f64,
    eta_i: f64,
    shots: u64,
    seed: u64,
) -> Result<KlyshkoCalibration> {
    let config = ExperimentConfig {
        source: source.clone(),
        setup: Setup::A,
        signal: DetectorSpec::threshold(eta_s)?,
        idler: DetectorSpec::threshold(eta_i)?,
        collective_bins: None,
        shots,
        seed,
    };
    let outcome = run_experiment(&config)?;
    let cal = KlyshkoCalibration::from_events(outcome.events());
    if cal.signal.is_none() && cal.idler.is_none() {
        return Err(Error::Degenerate("neither arm registered any event".into()));
    }
    Ok(cal)
}
