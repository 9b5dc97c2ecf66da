//! Configuration files, shot records, result documents and their on-disk
//! formats.
//!
//! Every JSON document carries `"format_version": 1` and uses
//! lower_snake_case keys. Files are written to a temporary sibling first
//! and renamed into place.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::detector::{uniform_bins, validate_bin_probs, TmdConfig, DEFAULT_BINS};
use crate::dist::{default_truncation, JointClickStatistics, JointPhotonDistribution, PhotonDistribution};
use crate::error::{Error, Result};
use crate::montecarlo::{DetectorSpec, ExperimentConfig, Setup, ShotCounter, ShotRecord};
use crate::reconstruct::Method;
use crate::sources::{multimode_pair_dist_weighted, SourceModel};

pub const FORMAT_VERSION: u32 = 1;

/// Header of the shot CSV format.
pub const SHOT_HEADER: [&str; 3] = ["shot_id", "signal_mask", "idler_mask"];

fn default_format_version() -> u32 {
    FORMAT_VERSION
}

/// Light source as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    ThermalPairs {
        mean: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_max: Option<usize>,
    },
    MultimodePairs {
        modes: u64,
        mean: f64,
        /// Per-mode means; when present their count is `modes` and their
        /// sum is `mean`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode_means: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_max: Option<usize>,
    },
    PoissonPairs {
        mean: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_max: Option<usize>,
    },
    FockPairs {
        n: usize,
    },
    Thermal {
        mean: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_max: Option<usize>,
    },
    Poisson {
        mean: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_max: Option<usize>,
    },
    Fock {
        n: usize,
    },
}

fn check_source_mean(mean: f64) -> Result<()> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::config("source.mean", format!("must be finite and >= 0, got {mean}")));
    }
    Ok(())
}

impl SourceSpec {
    /// Copy with the photon-number truncation filled in.
    pub fn resolved(&self) -> Result<SourceSpec> {
        let fill = |mean: f64, n_max: Option<usize>| -> Result<Option<usize>> {
            check_source_mean(mean)?;
            Ok(Some(n_max.unwrap_or_else(|| default_truncation(mean))))
        };
        Ok(match self.clone() {
            SourceSpec::ThermalPairs { mean, n_max } => SourceSpec::ThermalPairs {
                mean,
                n_max: fill(mean, n_max)?,
            },
            SourceSpec::MultimodePairs {
                modes,
                mean,
                mode_means,
                n_max,
            } => {
                if modes == 0 {
                    return Err(Error::config("source.modes", "must be at least 1"));
                }
                if let Some(means) = &mode_means {
                    if means.len() as u64 != modes {
                        return Err(Error::config(
                            "source.mode_means",
                            format!("has {} entries but modes = {modes}", means.len()),
                        ));
                    }
                    if means.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                        return Err(Error::config("source.mode_means", "entries must be finite and >= 0"));
                    }
                    let sum: f64 = means.iter().sum();
                    if (sum - mean).abs() > 1e-9 * (1.0 + mean) {
                        return Err(Error::config(
                            "source.mode_means",
                            format!("sum to {sum} but mean = {mean}"),
                        ));
                    }
                }
                SourceSpec::MultimodePairs {
                    modes,
                    mean,
                    mode_means,
                    n_max: fill(mean, n_max)?,
                }
            }
            SourceSpec::PoissonPairs { mean, n_max } => SourceSpec::PoissonPairs {
                mean,
                n_max: fill(mean, n_max)?,
            },
            SourceSpec::Thermal { mean, n_max } => SourceSpec::Thermal {
                mean,
                n_max: fill(mean, n_max)?,
            },
            SourceSpec::Poisson { mean, n_max } => SourceSpec::Poisson {
                mean,
                n_max: fill(mean, n_max)?,
            },
            fock @ (SourceSpec::FockPairs { .. } | SourceSpec::Fock { .. }) => fock,
        })
    }

    pub fn build(&self) -> Result<SourceModel> {
        let resolved = self.resolved()?;
        let n_max = |n: &Option<usize>| n.expect("resolved");
        match &resolved {
            SourceSpec::ThermalPairs { mean, n_max: n } => SourceModel::single_mode_squeezer(*mean, n_max(n)),
            SourceSpec::MultimodePairs {
                modes,
                mean,
                mode_means,
                n_max: n,
            } => match mode_means {
                Some(means) => SourceModel::twin_beam(multimode_pair_dist_weighted(means, n_max(n))?),
                None => SourceModel::multimode(*modes, *mean, n_max(n)),
            },
            SourceSpec::PoissonPairs { mean, n_max: n } => SourceModel::poisson_pairs(*mean, n_max(n)),
            SourceSpec::FockPairs { n } => Ok(SourceModel::fock_pairs(*n)),
            SourceSpec::Thermal { mean, n_max: n } => SourceModel::thermal_beam(*mean, n_max(n)),
            SourceSpec::Poisson { mean, n_max: n } => SourceModel::poisson_beam(*mean, n_max(n)),
            SourceSpec::Fock { n } => Ok(SourceModel::fock_beam(*n)),
        }
    }
}

/// One detector arm as written in a config file; omitted fields take
/// defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    /// Standard deviation of the efficiency calibration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_probs: Option<Vec<f64>>,
    /// Photon-number truncation used for reconstruction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectiveFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

/// Config file as written by a user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub setup: Setup,
    pub source: SourceSpec,
    #[serde(default)]
    pub signal: ArmFile,
    #[serde(default)]
    pub idler: ArmFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collective: Option<CollectiveFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    pub shots: u64,
    pub seed: u64,
}

/// A resolved detector arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmConfig {
    pub detector: DetectorSpec,
    pub sigma_eta: f64,
    pub n_max: usize,
}

impl ArmConfig {
    fn resolve(name: &str, file: &ArmFile) -> Result<Self> {
        let field = |f: &str| format!("{name}.{f}");
        let efficiency = file.efficiency.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::config(field("efficiency"), format!("must lie in [0, 1], got {efficiency}")));
        }
        let sigma_eta = file.sigma_eta.unwrap_or(0.0);
        if !(sigma_eta.is_finite() && sigma_eta >= 0.0) {
            return Err(Error::config(field("sigma_eta"), format!("must be finite and >= 0, got {sigma_eta}")));
        }
        let bin_probs = file.bin_probs.clone().unwrap_or_else(|| uniform_bins(DEFAULT_BINS));
        validate_bin_probs(&bin_probs).map_err(|e| Error::config(field("bin_probs"), e.to_string()))?;
        let n_max = file.n_max.unwrap_or(bin_probs.len());
        if n_max > bin_probs.len() {
            return Err(Error::config(
                field("n_max"),
                format!("{n_max} exceeds the {} time bins", bin_probs.len()),
            ));
        }
        Ok(Self {
            detector: DetectorSpec::new(bin_probs, efficiency)?,
            sigma_eta,
            n_max,
        })
    }

    fn to_file(&self) -> ArmFile {
        ArmFile {
            efficiency: Some(self.detector.efficiency()),
            sigma_eta: Some(self.sigma_eta),
            bin_probs: Some(self.detector.bin_probs().to_vec()),
            n_max: Some(self.n_max),
        }
    }

    pub fn tmd(&self) -> Result<TmdConfig> {
        self.detector.tmd_config(self.n_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveConfig {
    pub bin_probs: Vec<f64>,
    pub n_max: usize,
}

/// A validated config with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub setup: Setup,
    /// Source with its truncation resolved.
    pub source: SourceSpec,
    pub signal: ArmConfig,
    pub idler: ArmConfig,
    /// Present exactly for setup C.
    pub collective: Option<CollectiveConfig>,
    pub method: Method,
    pub shots: u64,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(file: &ConfigFile) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return Err(Error::config(
                "format_version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", file.format_version),
            ));
        }
        if file.shots == 0 {
            return Err(Error::config("shots", "must be at least 1"));
        }
        let source = file.source.resolved()?;
        source.build().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config("source", other.to_string()),
        })?;
        let collective = match (file.setup, &file.collective) {
            (Setup::C, c) => {
                let c = c.clone().unwrap_or_default();
                let bin_probs = c.bin_probs.unwrap_or_else(|| uniform_bins(DEFAULT_BINS));
                validate_bin_probs(&bin_probs).map_err(|e| Error::config("collective.bin_probs", e.to_string()))?;
                let n_max = c.n_max.unwrap_or(bin_probs.len());
                if n_max > bin_probs.len() {
                    return Err(Error::config(
                        "collective.n_max",
                        format!("{n_max} exceeds the {} time bins", bin_probs.len()),
                    ));
                }
                Some(CollectiveConfig { bin_probs, n_max })
            }
            (_, Some(_)) => {
                return Err(Error::config("collective", "a shared detector is only used in setup C"));
            }
            (_, None) => None,
        };
        Ok(Self {
            setup: file.setup,
            source,
            signal: ArmConfig::resolve("signal", &file.signal)?,
            idler: ArmConfig::resolve("idler", &file.idler)?,
            collective,
            method: file.method.unwrap_or_default(),
            shots: file.shots,
            seed: file.seed,
        })
    }

    /// The fully explicit config file describing `self`.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            format_version: FORMAT_VERSION,
            setup: self.setup,
            source: self.source.clone(),
            signal: self.signal.to_file(),
            idler: self.idler.to_file(),
            collective: self.collective.as_ref().map(|c| CollectiveFile {
                bin_probs: Some(c.bin_probs.clone()),
                n_max: Some(c.n_max),
            }),
            method: Some(self.method),
            shots: self.shots,
            seed: self.seed,
        }
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let config = ExperimentConfig {
            source: self.source.build()?,
            setup: self.setup,
            signal: self.signal.detector.clone(),
            idler: self.idler.detector.clone(),
            collective_bins: self.collective.as_ref().map(|c| c.bin_probs.clone()),
            shots: self.shots,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// `(signal bins, idler bins)` of the shot records; setup C records the
    /// shared detector as the signal column and has no idler column.
    pub fn record_bins(&self) -> (usize, Option<usize>) {
        match &self.collective {
            Some(c) => (c.bin_probs.len(), None),
            None => (self.signal.detector.bins(), Some(self.idler.detector.bins())),
        }
    }
}

impl Serialize for RunConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

/// Parses and validates a config document. Errors name the offending
/// field as a dotted path.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<root>".to_string() } else { path };
        Error::config(field, e.into_inner().to_string())
    })?;
    RunConfig::resolve(&file)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_str(&read_to_string(path)?)
}

/// Fills in every default of a config document.
pub fn normalize_config(file: &ConfigFile) -> Result<ConfigFile> {
    Ok(RunConfig::resolve(file)?.to_file())
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

/// Writes through `fill` into a temporary sibling of `path`, then renames
/// it over `path`.
pub fn write_atomic_with(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic_with(path, |w| w.write_all(bytes))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::Numerical(format!("cannot encode JSON: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

/// Writes shot records as CSV; the idler column is omitted when
/// `with_idler` is false.
pub fn write_shots_csv(path: &Path, shots: impl Iterator<Item = ShotRecord>, with_idler: bool) -> Result<()> {
    write_atomic_with(path, |w| {
        let header = if with_idler { &SHOT_HEADER[..] } else { &SHOT_HEADER[..2] };
        writeln!(w, "{}", header.join(","))?;
        for s in shots {
            if with_idler {
                writeln!(w, "{},{},{}", s.shot_id, s.signal_mask, s.idler_mask)?;
            } else {
                writeln!(w, "{},{}", s.shot_id, s.signal_mask)?;
            }
        }
        Ok(())
    })
}

fn parse_mask(field: &str, bins: usize, line: usize, column: &str) -> Result<u32> {
    let mask: u64 = field
        .trim()
        .parse()
        .map_err(|_| Error::data(Some(line), format!("{column} {field:?} is not a decimal integer")))?;
    if bins < 64 && mask >> bins != 0 {
        return Err(Error::data(
            Some(line),
            format!("{column} {mask} sets bits beyond the {bins} declared bins"),
        ));
    }
    u32::try_from(mask).map_err(|_| Error::data(Some(line), format!("{column} {mask} exceeds 32 bits")))
}

/// Aggregates shot records from CSV into a click histogram.
///
/// `signal_bins` and `idler_bins` are the declared detector sizes; without
/// an idler column every shot counts as zero idler clicks.
pub fn ingest_shots_from<R: Read>(reader: R, signal_bins: usize, idler_bins: usize) -> Result<JointClickStatistics> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::data(Some(1), format!("unreadable header: {e}")))?
        .clone();
    let columns: Vec<&str> = header.iter().map(str::trim).collect();
    let with_idler = match columns.as_slice() {
        c if c == SHOT_HEADER => true,
        c if c == &SHOT_HEADER[..2] => false,
        _ => {
            return Err(Error::data(
                Some(1),
                format!("expected header {:?}, found {columns:?}", SHOT_HEADER.join(",")),
            ))
        }
    };
    let mut counter = ShotCounter::new((signal_bins + 1, idler_bins + 1));
    let mut rows = 0u64;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::data(line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let shot_id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::data(Some(line), format!("shot_id {:?} is not a decimal integer", &record[0])))?;
        let signal_mask = parse_mask(&record[1], signal_bins, line, "signal_mask")?;
        let idler_mask = if with_idler {
            parse_mask(&record[2], idler_bins, line, "idler_mask")?
        } else {
            0
        };
        counter.add(&ShotRecord {
            shot_id,
            signal_mask,
            idler_mask,
        })?;
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::data(None, "no shots"));
    }
    counter.finish()
}

pub fn ingest_shots(path: &Path, signal_bins: usize, idler_bins: usize) -> Result<JointClickStatistics> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    ingest_shots_from(file, signal_bins, idler_bins)
}

/// A value in dB: one decimal place, `-inf` for an exactly vanishing
/// variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decibels(pub f64);

impl std::fmt::Display for Decibels {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            x if x == f64::NEG_INFINITY => f.write_str("-inf"),
            x if x == f64::INFINITY => f.write_str("inf"),
            x if x.is_nan() => f.write_str("nan"),
            x => write!(f, "{:.1}", x),
        }
    }
}

impl Serialize for Decibels {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let rendered: f64 = format!("{:.1}", self.0).parse().expect("formatted float");
            s.serialize_f64(rendered)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

/// Provenance of the files in one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            seed: None,
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// CSV table `n,p[,std]` of a photon-number distribution.
pub fn distribution_csv(dist: &PhotonDistribution, std_dev: Option<&[f64]>) -> String {
    let mut out = String::from(if std_dev.is_some() { "n,p,std\n" } else { "n,p\n" });
    for (n, p) in dist.probs().iter().enumerate() {
        match std_dev {
            Some(s) => out.push_str(&format!("{n},{p},{}\n", s[n])),
            None => out.push_str(&format!("{n},{p}\n")),
        }
    }
    out
}

/// CSV table `n,m,p` of a joint distribution.
pub fn joint_csv(dist: &JointPhotonDistribution) -> String {
    let mut out = String::from("n,m,p\n");
    let p = dist.probs();
    for n in 0..p.nrows() {
        for m in 0..p.ncols() {
            out.push_str(&format!("{n},{m},{}\n", p[(n, m)]));
        }
    }
    out
}

/// CSV table `c,d,count` of a click histogram.
pub fn clicks_csv(clicks: &JointClickStatistics) -> String {
    let mut out = String::from("signal_clicks,idler_clicks,count\n");
    let k = clicks.counts();
    for c in 0..k.nrows() {
        for d in 0..k.ncols() {
            out.push_str(&format!("{c},{d},{}\n", k[(c, d)]));
        }
    }
    out
}

fn parse_json(path: &Path) -> Result<Value> {
    serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::data(Some(e.line()), e.to_string()))
}

/// Places where the documents written by this tool keep a single
/// distribution, tried in order.
const SINGLE_POINTERS: [&str; 8] = [
    "/probs",
    "/dist/probs",
    "/marginals/0/dist/probs",
    "/idler_marginal/dist/probs",
    "/collective/dist/probs",
    "/signal_marginal/probs",
    "/joint/metrics/signal_marginal/probs",
    "/reconstruction/metrics/signal_marginal/probs",
];

/// Places where the documents written by this tool keep a joint
/// distribution, tried in order.
const JOINT_POINTERS: [&str; 4] = ["/probs", "/dist/probs", "/joint/dist/probs", "/reconstruction/dist/probs"];

/// The array at `pointer`, or the first candidate whose array has the
/// requested nesting (`true` for a matrix).
fn find_probs<'a>(doc: &'a Value, pointer: Option<&str>, candidates: &[&str], matrix: bool) -> Result<&'a Value> {
    if let Some(ptr) = pointer {
        return doc
            .pointer(ptr)
            .ok_or_else(|| Error::data(None, format!("document has nothing at `{ptr}`")));
    }
    let is_matrix = |v: &Value| v.as_array().and_then(|a| a.first()).is_some_and(Value::is_array);
    candidates
        .iter()
        .filter_map(|c| doc.pointer(c))
        .find(|v| v.is_array() && is_matrix(v) == matrix)
        .ok_or_else(|| {
            let what = if matrix { "joint" } else { "photon-number" };
            Error::data(None, format!("no {what} distribution found; tried {}", candidates.join(", ")))
        })
}

/// Reads a photon-number distribution from the document at `path`; with
/// `pointer` unset the usual locations of the tool's own outputs are
/// searched.
pub fn load_distribution(path: &Path, pointer: Option<&str>) -> Result<PhotonDistribution> {
    let doc = parse_json(path)?;
    let probs = find_probs(&doc, pointer, &SINGLE_POINTERS, false)?;
    let probs: Vec<f64> = serde_json::from_value(probs.clone())
        .map_err(|e| Error::data(None, format!("`probs` is not a number array: {e}")))?;
    PhotonDistribution::new(probs).map_err(|e| Error::data(None, e.to_string()))
}

/// Reads a joint distribution (`probs` as rows, signal photon number
/// first) like [`load_distribution`].
pub fn load_joint_distribution(path: &Path, pointer: Option<&str>) -> Result<JointPhotonDistribution> {
    let doc = parse_json(path)?;
    let probs = find_probs(&doc, pointer, &JOINT_POINTERS, true)?;
    serde_json::from_value(serde_json::json!({ "probs": probs }))
        .map_err(|e| Error::data(None, format!("`probs` is not a joint distribution: {e}")))
}

/// Reads a click histogram from a document holding `clicks` or
/// `counts`/`total_shots` at the top level.
pub fn load_clicks(path: &Path) -> Result<JointClickStatistics> {
    let doc = parse_json(path)?;
    let node = doc.get("clicks").unwrap_or(&doc);
    serde_json::from_value(node.clone()).map_err(|e| Error::data(None, format!("invalid click histogram: {e}")))
}
