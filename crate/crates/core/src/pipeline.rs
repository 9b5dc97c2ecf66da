//! End-to-end analyses behind the command line: reconstruction per setup,
//! figures of merit, fits, and replications of the four measurement
//! configurations at their reference operating points.

use serde::Serialize;

use crate::detector::{uniform_bins, TmdConfig, DEFAULT_BINS};
use crate::dist::{ClickStatistics, JointClickStatistics, JointPhotonDistribution, PhotonDistribution};
use crate::error::{Error, Result};
use crate::io::{
    distribution_csv, joint_csv, matrix_rows, ArmConfig, CollectiveConfig, Decibels, RunConfig, SourceSpec,
    FORMAT_VERSION,
};
use crate::montecarlo::{run_experiment, DetectorSpec, EventCounts, KlyshkoCalibration, Setup};
use crate::reconstruct::{invert_joint_with, invert_single_with, CalibrationRecord, InversionOptions, Method};
use crate::stats::{
    combine_collective, correlation, fit_poisson, fit_thermal, joint_moments, marginals, moment,
    noise_reduction_db, number_squeezing_db, FitFamily, FitResult, JointMoments,
};

/// Pump repetition rate used to convert per-shot rates to per-second.
pub const REPETITION_RATE_HZ: f64 = 1e6;

/// Reconstruction of one photon-number distribution.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalReport {
    pub label: String,
    pub efficiency: f64,
    pub sigma_eta: f64,
    pub n_max: usize,
    pub method: Method,
    pub condition_number: f64,
    pub residual: f64,
    /// No entry below the negativity tolerance.
    pub physical: bool,
    pub mean: f64,
    pub mean_std_dev: f64,
    /// `<n>`, `<n^2>`, `<n^3>`.
    pub moments: [f64; 3],
    pub dist: PhotonDistribution,
    pub std_dev: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl MarginalReport {
    pub fn table(&self) -> String {
        distribution_csv(&self.dist, Some(&self.std_dev))
    }
}

/// Reconstructs the photon statistics behind single-detector clicks.
pub fn reconstruct_marginal(
    label: &str,
    tmd: &TmdConfig,
    clicks: &ClickStatistics,
    method: Method,
    sigma_eta: f64,
) -> Result<MarginalReport> {
    let r = invert_single_with(tmd, &clicks.frequencies(), &InversionOptions { method, sigma_eta })?;
    Ok(MarginalReport {
        label: label.to_string(),
        efficiency: tmd.efficiency(),
        sigma_eta,
        n_max: tmd.n_max(),
        method,
        condition_number: r.condition_number,
        residual: r.residual,
        physical: r.dist.is_physical(),
        mean: r.dist.mean(),
        mean_std_dev: r.mean_std_dev(),
        moments: [1, 2, 3].map(|m| moment(&r.dist, m)),
        std_dev: (0..=tmd.n_max()).map(|n| r.std_dev(n)).collect(),
        covariance: matrix_rows(&r.covariance),
        dist: r.dist,
    })
}

/// Correlation figures of a joint distribution. Quantities that are
/// undefined for the input are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct JointMetrics {
    pub correlation: Option<f64>,
    /// `Var(n_s - n_i)` relative to `<n_s><n_i>`.
    pub number_squeezing_db: Option<Decibels>,
    /// `Var(n_s - n_i)` relative to `<n_s> + <n_i>`.
    pub noise_reduction_db: Option<Decibels>,
    pub diagonal_mass: f64,
    pub moments: JointMoments,
    pub signal_marginal: PhotonDistribution,
    pub idler_marginal: PhotonDistribution,
}

pub fn joint_metrics(joint: &JointPhotonDistribution) -> JointMetrics {
    let p = joint.probs();
    let (signal_marginal, idler_marginal) = marginals(joint);
    JointMetrics {
        correlation: correlation(joint).ok(),
        number_squeezing_db: number_squeezing_db(joint).ok().map(Decibels),
        noise_reduction_db: noise_reduction_db(joint).ok().map(Decibels),
        diagonal_mass: (0..p.nrows().min(p.ncols())).map(|n| p[(n, n)]).sum(),
        moments: joint_moments(joint),
        signal_marginal,
        idler_marginal,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JointReport {
    pub method: Method,
    pub efficiency: [f64; 2],
    pub n_max: [usize; 2],
    pub condition_number: f64,
    pub residual: f64,
    pub physical: bool,
    pub dist: JointPhotonDistribution,
    pub signal_marginal_covariance: Vec<Vec<f64>>,
    pub idler_marginal_covariance: Vec<Vec<f64>>,
    pub metrics: JointMetrics,
}

pub fn reconstruct_joint(
    signal: &ArmConfig,
    idler: &ArmConfig,
    clicks: &JointClickStatistics,
    method: Method,
) -> Result<JointReport> {
    let (ts, ti) = (signal.tmd()?, idler.tmd()?);
    let r = invert_joint_with(&ts, &ti, &clicks.frequencies(), method, [signal.sigma_eta, idler.sigma_eta])?;
    Ok(JointReport {
        method,
        efficiency: [ts.efficiency(), ti.efficiency()],
        n_max: [ts.n_max(), ti.n_max()],
        condition_number: r.condition_number,
        residual: r.residual,
        physical: r.dist.is_physical(),
        signal_marginal_covariance: matrix_rows(&r.signal_covariance),
        idler_marginal_covariance: matrix_rows(&r.idler_covariance),
        metrics: joint_metrics(&r.dist),
        dist: r.dist,
    })
}

/// Efficiency assumed for the merged beams in a shared detector: the mean
/// of the two arm efficiencies.
pub fn collective_efficiency(signal: &ArmConfig, idler: &ArmConfig) -> f64 {
    0.5 * (signal.detector.efficiency() + idler.detector.efficiency())
}

pub fn collective_tmd(config: &CollectiveConfig, eta: f64) -> Result<TmdConfig> {
    TmdConfig::new(config.bin_probs.clone(), eta, config.n_max)
}

/// Photon statistics recovered from a click histogram, by setup.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionDoc {
    pub format_version: u32,
    pub setup: Setup,
    pub shots: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub marginals: Vec<MarginalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointReport>,
}

impl ReconstructionDoc {
    /// `(file name, CSV)` for every reconstructed distribution.
    pub fn tables(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> =
            self.marginals.iter().map(|m| (format!("{}.csv", m.label), m.table())).collect();
        if let Some(j) = &self.joint {
            out.push(("joint.csv".into(), joint_csv(&j.dist)));
        }
        out
    }
}

/// Reconstruction appropriate to the setup that produced `clicks`:
/// per-arm marginals (A), the idler marginal and its heralded counterpart
/// (B), the collective distribution (C), or the joint distribution (D).
pub fn reconstruct(config: &RunConfig, clicks: &JointClickStatistics, method: Method) -> Result<ReconstructionDoc> {
    let (rows, cols) = config.experiment()?.histogram_shape();
    if clicks.counts().shape() != (rows, cols) {
        return Err(Error::data(
            None,
            format!(
                "click histogram is {:?} but setup {} expects {:?}",
                clicks.counts().shape(),
                config.setup,
                (rows, cols)
            ),
        ));
    }
    let (s, i) = (&config.signal, &config.idler);
    let mut doc = ReconstructionDoc {
        format_version: FORMAT_VERSION,
        setup: config.setup,
        shots: clicks.total_shots(),
        marginals: Vec::new(),
        joint: None,
    };
    match config.setup {
        Setup::A => {
            doc.marginals.push(reconstruct_marginal("signal", &s.tmd()?, &clicks.signal_marginal(), method, s.sigma_eta)?);
            doc.marginals.push(reconstruct_marginal("idler", &i.tmd()?, &clicks.idler_marginal(), method, i.sigma_eta)?);
        }
        Setup::B => {
            let tmd = i.tmd()?;
            doc.marginals.push(reconstruct_marginal("idler", &tmd, &clicks.idler_marginal(), method, i.sigma_eta)?);
            let heralded = clicks.idler_given_signal(|c| c > 0).map_err(|_| {
                Error::Degenerate("the signal detector never fired; nothing heralds the idler".into())
            })?;
            doc.marginals.push(reconstruct_marginal("idler_heralded", &tmd, &heralded, method, i.sigma_eta)?);
        }
        Setup::C => {
            let shared = config.collective.as_ref().expect("setup C has a shared detector");
            let tmd = collective_tmd(shared, collective_efficiency(s, i))?;
            let sigma = 0.5 * (s.sigma_eta.powi(2) + i.sigma_eta.powi(2)).sqrt();
            doc.marginals.push(reconstruct_marginal("collective", &tmd, &clicks.signal_marginal(), method, sigma)?);
        }
        Setup::D => doc.joint = Some(reconstruct_joint(s, i, clicks, method)?),
    }
    Ok(doc)
}

/// Poissonian and thermal fits of one distribution.
#[derive(Debug, Clone, Serialize)]
pub struct FitDoc {
    pub format_version: u32,
    pub mean: f64,
    pub moments: [f64; 3],
    pub poisson: FitResult,
    pub thermal: FitResult,
    /// Family with the smaller residual.
    pub preferred: FitFamily,
}

pub fn fit_document(dist: &PhotonDistribution) -> Result<FitDoc> {
    let poisson = fit_poisson(dist)?;
    let thermal = fit_thermal(dist)?;
    let preferred = if poisson.residual_l2 <= thermal.residual_l2 {
        FitFamily::Poisson
    } else {
        FitFamily::Thermal
    };
    Ok(FitDoc {
        format_version: FORMAT_VERSION,
        mean: dist.mean(),
        moments: [1, 2, 3].map(|m| moment(dist, m)),
        poisson,
        thermal,
        preferred,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsDoc {
    pub format_version: u32,
    #[serde(flatten)]
    pub metrics: JointMetrics,
}

pub fn metrics_document(joint: &JointPhotonDistribution) -> MetricsDoc {
    MetricsDoc {
        format_version: FORMAT_VERSION,
        metrics: joint_metrics(joint),
    }
}

/// Event counts, rates and efficiency estimates of a histogram.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationDoc {
    pub format_version: u32,
    pub events: EventCounts,
    pub singles_per_second: [f64; 2],
    pub coincidences_per_second: f64,
    pub signal: Option<CalibrationRecord>,
    pub idler: Option<CalibrationRecord>,
}

pub fn calibration_document(clicks: &JointClickStatistics) -> CalibrationDoc {
    let events = EventCounts::from_histogram(clicks);
    let cal = KlyshkoCalibration::from_events(events);
    let (rs, ri, rc) = events.rates();
    CalibrationDoc {
        format_version: FORMAT_VERSION,
        events,
        singles_per_second: [rs * REPETITION_RATE_HZ, ri * REPETITION_RATE_HZ],
        coincidences_per_second: rc * REPETITION_RATE_HZ,
        signal: cal.signal,
        idler: cal.idler,
    }
}

fn arm(bins: usize, efficiency: f64, sigma_eta: f64, n_max: usize) -> ArmConfig {
    ArmConfig {
        detector: DetectorSpec::uniform(bins, efficiency).expect("preset detector"),
        sigma_eta,
        n_max,
    }
}

/// Seed of an auxiliary run derived from the main seed.
fn companion_seed(seed: u64) -> u64 {
    seed.wrapping_add(1)
}

/// Default operating point of each setup.
///
/// * A: one photon pair per shot and threshold detectors with efficiencies
///   11.7 % and 13.7 %.
/// * B: Poissonian pairs (mean 0.3), threshold detector on the signal arm,
///   eight-bin detector at 11.3 % on the idler arm.
/// * C: Poissonian pairs (mean 0.3), both arms (11.7 %, 13.7 %) merged into
///   one eight-bin detector, reconstructed up to four photons.
/// * D: Poissonian pairs (mean 0.2), eight-bin detectors at 2.74 % and
///   11.1 %, reconstructed up to three photons per arm.
pub fn preset(setup: Setup) -> RunConfig {
    let poisson = |mean: f64| SourceSpec::PoissonPairs {
        mean,
        n_max: Some(crate::dist::default_truncation(mean)),
    };
    match setup {
        Setup::A => RunConfig {
            setup,
            source: SourceSpec::FockPairs { n: 1 },
            signal: arm(1, 0.117, 0.0, 1),
            idler: arm(1, 0.137, 0.0, 1),
            collective: None,
            method: Method::Direct,
            shots: 10_000_000,
            seed: 7,
        },
        Setup::B => RunConfig {
            setup,
            source: poisson(0.3),
            signal: arm(1, 0.117, 0.0, 1),
            idler: arm(DEFAULT_BINS, 0.113, 0.009, 3),
            collective: None,
            method: Method::Direct,
            shots: 1_000_000,
            seed: 7,
        },
        Setup::C => RunConfig {
            setup,
            source: poisson(0.3),
            signal: arm(1, 0.117, 0.0, 1),
            idler: arm(1, 0.137, 0.0, 1),
            collective: Some(CollectiveConfig {
                bin_probs: uniform_bins(DEFAULT_BINS),
                n_max: 4,
            }),
            method: Method::Direct,
            shots: 1_000_000,
            seed: 7,
        },
        Setup::D => RunConfig {
            setup,
            source: poisson(0.2),
            signal: arm(DEFAULT_BINS, 0.0274, 0.009, 3),
            idler: arm(DEFAULT_BINS, 0.111, 0.009, 3),
            collective: None,
            method: Method::Direct,
            shots: 10_000_000,
            seed: 7,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationSummary {
    pub true_efficiency: [f64; 2],
    pub eta_k: [Option<f64>; 2],
    pub eta_k_std_dev: [Option<f64>; 2],
    pub singles_per_shot: [f64; 2],
    pub coincidences_per_shot: f64,
    pub singles_per_second: [f64; 2],
    pub coincidences_per_second: f64,
}

fn calibration_summary(true_efficiency: [f64; 2], clicks: &JointClickStatistics) -> CalibrationSummary {
    let doc = calibration_document(clicks);
    let (rs, ri, rc) = doc.events.rates();
    CalibrationSummary {
        true_efficiency,
        eta_k: [doc.signal.map(|r| r.eta_estimate), doc.idler.map(|r| r.eta_estimate)],
        eta_k_std_dev: [doc.signal.map(|r| r.eta_uncertainty), doc.idler.map(|r| r.eta_uncertainty)],
        singles_per_shot: [rs, ri],
        coincidences_per_shot: rc,
        singles_per_second: doc.singles_per_second,
        coincidences_per_second: doc.coincidences_per_second,
    }
}

/// Entry-wise comparison of two reconstructions of the pair statistics.
#[derive(Debug, Clone, Serialize)]
pub struct PairComparison {
    pub n: usize,
    pub collective_2n: f64,
    pub marginal_n: f64,
    pub combined_std_dev: f64,
    /// Difference in units of `combined_std_dev`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OddEntry {
    pub n: usize,
    pub p: f64,
    /// Larger of the neighbouring even entries.
    pub adjacent_even_max: f64,
}

/// Summary of a replication run. Numbers mirror the standard figures of
/// merit for the setup.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "setup")]
pub enum ReplicateSummary {
    A {
        format_version: u32,
        config: RunConfig,
        calibration: CalibrationSummary,
        /// Same detectors behind a thermal source of mean 0.5: multi-pair
        /// events inflate the ratio estimate.
        high_gain_calibration: CalibrationSummary,
    },
    B {
        format_version: u32,
        config: RunConfig,
        calibration: CalibrationSummary,
        idler_marginal: MarginalReport,
        idler_heralded: MarginalReport,
        fit: FitDoc,
    },
    C {
        format_version: u32,
        config: RunConfig,
        collective: MarginalReport,
        /// Idler marginal from a companion setup-B run.
        marginal: MarginalReport,
        odd_entries: Vec<OddEntry>,
        even_vs_marginal: Vec<PairComparison>,
        /// Odd entries of the collective distribution of the ideal twin
        /// beam; identically zero.
        model_odd_mass: f64,
    },
    D {
        format_version: u32,
        config: RunConfig,
        raw: JointMetrics,
        reconstruction: JointReport,
    },
}

/// Summary and CSV tables of one replication.
#[derive(Debug, Clone)]
pub struct ReplicateOutput {
    pub summary: ReplicateSummary,
    pub tables: Vec<(String, String)>,
}

fn run_histogram(config: &RunConfig) -> Result<JointClickStatistics> {
    Ok(run_experiment(&config.experiment()?)?.clicks)
}

fn raw_metrics(clicks: &JointClickStatistics) -> JointMetrics {
    joint_metrics(&clicks.frequencies().as_joint_distribution())
}

/// Setup B companion of a setup C run: same source and idler efficiency,
/// the shared detector's bins on the idler arm, half the truncation.
pub fn companion_marginal_config(config: &RunConfig) -> Result<RunConfig> {
    let shared = config
        .collective
        .as_ref()
        .ok_or_else(|| Error::domain("companion run needs a setup C config"))?;
    Ok(RunConfig {
        setup: Setup::B,
        source: config.source.clone(),
        signal: arm(1, config.signal.detector.efficiency(), config.signal.sigma_eta, 1),
        idler: ArmConfig {
            detector: DetectorSpec::new(shared.bin_probs.clone(), config.idler.detector.efficiency())?,
            sigma_eta: config.idler.sigma_eta,
            n_max: shared.n_max / 2,
        },
        collective: None,
        method: config.method,
        shots: config.shots,
        seed: companion_seed(config.seed),
    })
}

/// Compares the collective reconstruction (total photon number of a twin
/// beam) with a marginal reconstruction (pair number).
pub fn compare_collective(collective: &MarginalReport, marginal: &MarginalReport) -> (Vec<OddEntry>, Vec<PairComparison>) {
    let q = collective.dist.probs();
    let odd = (1..q.len())
        .step_by(2)
        .map(|n| OddEntry {
            n,
            p: q[n],
            adjacent_even_max: q[n - 1].max(q.get(n + 1).copied().unwrap_or(f64::NEG_INFINITY)),
        })
        .collect();
    let even = (0..=marginal.n_max)
        .filter(|n| 2 * n < q.len())
        .map(|n| {
            let combined = (collective.std_dev[2 * n].powi(2) + marginal.std_dev[n].powi(2)).sqrt();
            let diff = q[2 * n] - marginal.dist.get(n);
            PairComparison {
                n,
                collective_2n: q[2 * n],
                marginal_n: marginal.dist.get(n),
                combined_std_dev: combined,
                z: if combined > 0.0 { diff / combined } else { f64::INFINITY * diff.signum() },
            }
        })
        .collect();
    (odd, even)
}

pub fn replicate(config: &RunConfig) -> Result<ReplicateOutput> {
    let method = config.method;
    let etas = [config.signal.detector.efficiency(), config.idler.detector.efficiency()];
    match config.setup {
        Setup::A => {
            let clicks = run_histogram(config)?;
            let high_gain = RunConfig {
                source: SourceSpec::ThermalPairs {
                    mean: 0.5,
                    n_max: Some(crate::dist::default_truncation(0.5)),
                },
                shots: config.shots.min(1_000_000),
                seed: companion_seed(config.seed),
                ..config.clone()
            };
            let high_clicks = run_histogram(&high_gain)?;
            Ok(ReplicateOutput {
                tables: vec![("clicks.csv".into(), crate::io::clicks_csv(&clicks))],
                summary: ReplicateSummary::A {
                    format_version: FORMAT_VERSION,
                    config: config.clone(),
                    calibration: calibration_summary(etas, &clicks),
                    high_gain_calibration: calibration_summary(etas, &high_clicks),
                },
            })
        }
        Setup::B => {
            let clicks = run_histogram(config)?;
            let doc = reconstruct(config, &clicks, method)?;
            let tables = doc.tables();
            let mut marginals = doc.marginals.into_iter();
            let idler_marginal = marginals.next().expect("idler marginal");
            let idler_heralded = marginals.next().expect("heralded idler");
            Ok(ReplicateOutput {
                tables,
                summary: ReplicateSummary::B {
                    format_version: FORMAT_VERSION,
                    config: config.clone(),
                    calibration: calibration_summary(etas, &clicks),
                    fit: fit_document(&idler_marginal.dist)?,
                    idler_marginal,
                    idler_heralded,
                },
            })
        }
        Setup::C => {
            let clicks = run_histogram(config)?;
            let collective = reconstruct(config, &clicks, method)?.marginals.remove(0);
            let companion = companion_marginal_config(config)?;
            let companion_clicks = run_histogram(&companion)?;
            let marginal = reconstruct(&companion, &companion_clicks, method)?.marginals.remove(0);
            let (odd_entries, even_vs_marginal) = compare_collective(&collective, &marginal);
            let model = combine_collective(&config.source.build()?.joint());
            let model_odd_mass = model.probs().iter().skip(1).step_by(2).sum();
            let tables = vec![
                ("collective.csv".into(), collective.table()),
                ("marginal.csv".into(), marginal.table()),
            ];
            Ok(ReplicateOutput {
                tables,
                summary: ReplicateSummary::C {
                    format_version: FORMAT_VERSION,
                    config: config.clone(),
                    collective,
                    marginal,
                    odd_entries,
                    even_vs_marginal,
                    model_odd_mass,
                },
            })
        }
        Setup::D => {
            let clicks = run_histogram(config)?;
            let reconstruction = reconstruct_joint(&config.signal, &config.idler, &clicks, method)?;
            Ok(ReplicateOutput {
                tables: vec![
                    ("clicks.csv".into(), crate::io::clicks_csv(&clicks)),
                    ("joint.csv".into(), joint_csv(&reconstruction.dist)),
                ],
                summary: ReplicateSummary::D {
                    format_version: FORMAT_VERSION,
                    config: config.clone(),
                    raw: raw_metrics(&clicks),
                    reconstruction,
                },
            })
        }
    }
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "undefined".into(), |v| format!("{v:.digits$}"))
}

fn fmt_db(x: Option<Decibels>) -> String {
    x.map_or_else(|| "undefined".into(), |d| format!("{d} dB"))
}

fn fmt_dist(d: &PhotonDistribution, std: &[f64]) -> String {
    d.probs()
        .iter()
        .zip(std)
        .enumerate()
        .map(|(n, (p, s))| format!("p{n}={p:.4}({s:.4})"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl ReplicateSummary {
    /// Human-readable digest; every number also appears in the JSON form.
    pub fn render(&self) -> String {
        let mut out = Vec::new();
        match self {
            ReplicateSummary::A { calibration: c, high_gain_calibration: h, .. } => {
                out.push("setup A: Klyshko calibration".to_string());
                for (k, arm) in ["signal", "idler"].iter().enumerate() {
                    out.push(format!(
                        "  {arm}: eta_K = {} +/- {} (true {:.4}), singles {:.0}/s",
                        fmt_opt(c.eta_k[k], 4),
                        fmt_opt(c.eta_k_std_dev[k], 4),
                        c.true_efficiency[k],
                        c.singles_per_second[k]
                    ));
                }
                out.push(format!("  coincidences {:.0}/s", c.coincidences_per_second));
                out.push(format!(
                    "  thermal source, mean 0.5: eta_K = {} / {}",
                    fmt_opt(h.eta_k[0], 4),
                    fmt_opt(h.eta_k[1], 4)
                ));
            }
            ReplicateSummary::B { calibration: c, idler_marginal: m, idler_heralded: h, fit, .. } => {
                out.push("setup B: idler marginal statistics".to_string());
                out.push(format!(
                    "  eta_K(idler) = {} +/- {} (true {:.4})",
                    fmt_opt(c.eta_k[1], 4),
                    fmt_opt(c.eta_k_std_dev[1], 4),
                    c.true_efficiency[1]
                ));
                out.push(format!("  marginal: {}", fmt_dist(&m.dist, &m.std_dev)));
                out.push(format!(
                    "  moments <n>={:.4} <n^2>={:.4} <n^3>={:.4}",
                    m.moments[0], m.moments[1], m.moments[2]
                ));
                out.push(format!(
                    "  fit residuals: poisson {:.4} (mean {:.4}), thermal {:.4} (mean {:.4})",
                    fit.poisson.residual_l2, fit.poisson.mean, fit.thermal.residual_l2, fit.thermal.mean
                ));
                out.push(format!("  heralded: {}", fmt_dist(&h.dist, &h.std_dev)));
            }
            ReplicateSummary::C { collective, marginal, odd_entries, even_vs_marginal, model_odd_mass, .. } => {
                out.push("setup C: collective statistics".to_string());
                out.push(format!("  collective: {}", fmt_dist(&collective.dist, &collective.std_dev)));
                out.push(format!("  marginal:   {}", fmt_dist(&marginal.dist, &marginal.std_dev)));
                for o in odd_entries {
                    out.push(format!("  odd p{} = {:.5} vs adjacent even {:.5}", o.n, o.p, o.adjacent_even_max));
                }
                for e in even_vs_marginal {
                    out.push(format!(
                        "  p_coll[{}] = {:.5} vs p_marg[{}] = {:.5}, z = {:.2}",
                        2 * e.n,
                        e.collective_2n,
                        e.n,
                        e.marginal_n,
                        e.z
                    ));
                }
                out.push(format!("  model odd mass = {model_odd_mass:e}"));
            }
            ReplicateSummary::D { raw, reconstruction: r, .. } => {
                out.push("setup D: joint statistics".to_string());
                out.push(format!(
                    "  raw clicks:     correlation {}, squeezing {}, noise reduction {}",
                    fmt_opt(raw.correlation, 3),
                    fmt_db(raw.number_squeezing_db),
                    fmt_db(raw.noise_reduction_db)
                ));
                out.push(format!(
                    "  reconstruction: correlation {}, squeezing {}, noise reduction {}",
                    fmt_opt(r.metrics.correlation, 3),
                    fmt_db(r.metrics.number_squeezing_db),
                    fmt_db(r.metrics.noise_reduction_db)
                ));
                out.push(format!(
                    "  diagonal mass {:.4}, condition number {:.3e}, method {:?}",
                    r.metrics.diagonal_mass, r.condition_number, r.method
                ));
            }
        }
        out.join("\n")
    }
}
