use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tmdstat::dist::JointClickStatistics;
use tmdstat::error::{Error, Result};
use tmdstat::io::{
    clicks_csv, ingest_shots, load_clicks, load_distribution, load_joint_distribution, parse_config, write_atomic,
    write_json, write_shots_csv, RunConfig, RunManifest, FORMAT_VERSION,
};
use tmdstat::montecarlo::{run_experiment, shot_stream, EventCounts, Setup};
use tmdstat::pipeline::{
    calibration_document, fit_document, metrics_document, preset, reconstruct, replicate,
};
use tmdstat::reconstruct::Method;

#[derive(Parser)]
#[command(name = "tmdstat", version, about = "Twin-beam photon statistics with time-multiplexed detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "tmdstat-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunOverrides {
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of shots of the config.
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an experiment and write its click histogram.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunOverrides,
        /// Also write every shot to shots.csv.
        #[arg(long)]
        emit_shots: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Efficiency estimates from coincidences; simulates the config when
    /// no input is given.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Click histogram (JSON) or shot records (CSV, needs --config).
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        run: RunOverrides,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct photon statistics from a click histogram or shot records.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Enforce non-negative, normalized solutions.
        #[arg(long)]
        constrained: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Correlation, squeezing and moments of a joint distribution.
    Metrics {
        #[arg(long)]
        input: PathBuf,
        /// JSON pointer to the `probs` matrix, e.g. `/joint/dist/probs`.
        #[arg(long)]
        pointer: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Poissonian and thermal fits of a photon-number distribution.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// JSON pointer to the `probs` array, e.g. `/marginals/1/dist/probs`.
        #[arg(long)]
        pointer: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate, calibrate, reconstruct and summarize one setup.
    Replicate {
        /// A, B, C or D.
        setup: Setup,
        /// Replaces the built-in operating point of the setup.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        run: RunOverrides,
        #[arg(long)]
        constrained: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Serialize)]
struct ClicksDoc<'a> {
    format_version: u32,
    setup: Setup,
    seed: u64,
    shots: u64,
    events: EventCounts,
    clicks: &'a JointClickStatistics,
}

/// Collects the files of one output directory and writes the manifest
/// last.
struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl Outputs {
    fn new(dir: &Path, command: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(command),
            start: Instant::now(),
        }
    }

    fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.display().to_string());
    }

    fn config(&mut self, config: &RunConfig) -> Result<()> {
        self.manifest.seed = Some(config.seed);
        self.manifest.config =
            Some(serde_json::to_value(config).map_err(|e| Error::Numerical(format!("cannot encode config: {e}")))?);
        Ok(())
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        write_json(&path, value)
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        write_atomic(&path, text.as_bytes())
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        write_json(&self.dir.join("manifest.json"), &self.manifest)?;
        eprintln!("wrote {} file(s) to {}", self.manifest.outputs.len() + 1, self.dir.display());
        Ok(())
    }
}

fn load_run_config(path: &Path, run: &RunOverrides) -> Result<RunConfig> {
    let mut config = parse_config(path)?;
    apply_overrides(&mut config, run)?;
    Ok(config)
}

fn apply_overrides(config: &mut RunConfig, run: &RunOverrides) -> Result<()> {
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    if let Some(shots) = run.shots {
        if shots == 0 {
            return Err(Error::config("shots", "must be at least 1"));
        }
        config.shots = shots;
    }
    Ok(())
}

fn read_clicks(input: &Path, config: Option<&RunConfig>) -> Result<JointClickStatistics> {
    let is_csv = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if !is_csv {
        return load_clicks(input);
    }
    let config = config.ok_or_else(|| Error::config("config", "shot records need --config to declare the bins"))?;
    let (signal_bins, idler_bins) = config.record_bins();
    ingest_shots(input, signal_bins, idler_bins.unwrap_or(0))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("cannot encode JSON: {e}")))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            run,
            emit_shots,
            common,
        } => {
            let cfg = load_run_config(&config, &run)?;
            let experiment = cfg.experiment()?;
            let mut out = Outputs::new(&common.out, "simulate");
            out.input(&config);
            out.config(&cfg)?;
            let outcome = run_experiment(&experiment)?;
            let doc = ClicksDoc {
                format_version: FORMAT_VERSION,
                setup: cfg.setup,
                seed: cfg.seed,
                shots: cfg.shots,
                events: outcome.events(),
                clicks: &outcome.clicks,
            };
            out.json("clicks.json", &doc)?;
            out.text("clicks.csv", &clicks_csv(&outcome.clicks))?;
            if emit_shots {
                let path = out.path("shots.csv");
                write_shots_csv(&path, shot_stream(&experiment)?, cfg.record_bins().1.is_some())?;
            }
            print_json(&doc.events)?;
            out.finish()
        }
        Command::Calibrate {
            config,
            input,
            run,
            common,
        } => {
            let cfg = config.as_deref().map(|p| load_run_config(p, &run)).transpose()?;
            let mut out = Outputs::new(&common.out, "calibrate");
            let clicks = match (&input, &cfg) {
                (Some(path), _) => {
                    out.input(path);
                    read_clicks(path, cfg.as_ref())?
                }
                (None, Some(cfg)) => {
                    out.config(cfg)?;
                    run_experiment(&cfg.experiment()?)?.clicks
                }
                (None, None) => return Err(Error::config("input", "give --input or --config")),
            };
            if let Some(path) = &config {
                out.input(path);
            }
            let doc = calibration_document(&clicks);
            out.json("calibration.json", &doc)?;
            print_json(&doc)?;
            out.finish()
        }
        Command::Reconstruct {
            config,
            input,
            constrained,
            common,
        } => {
            let mut cfg = parse_config(&config)?;
            if constrained {
                cfg.method = Method::Constrained;
            }
            let clicks = read_clicks(&input, Some(&cfg))?;
            let doc = reconstruct(&cfg, &clicks, cfg.method)?;
            let mut out = Outputs::new(&common.out, "reconstruct");
            out.input(&config);
            out.input(&input);
            out.config(&cfg)?;
            out.json("reconstruction.json", &doc)?;
            for (name, table) in doc.tables() {
                out.text(&name, &table)?;
            }
            out.finish()
        }
        Command::Metrics { input, pointer, common } => {
            let joint = load_joint_distribution(&input, pointer.as_deref())?;
            let doc = metrics_document(&joint);
            let mut out = Outputs::new(&common.out, "metrics");
            out.input(&input);
            out.json("metrics.json", &doc)?;
            print_json(&doc)?;
            out.finish()
        }
        Command::Fit { input, pointer, common } => {
            let dist = load_distribution(&input, pointer.as_deref())?;
            let doc = fit_document(&dist)?;
            let mut out = Outputs::new(&common.out, "fit");
            out.input(&input);
            out.json("fit.json", &doc)?;
            print_json(&doc)?;
            out.finish()
        }
        Command::Replicate {
            setup,
            config,
            run,
            constrained,
            common,
        } => {
            let mut cfg = match &config {
                Some(path) => {
                    let cfg = parse_config(path)?;
                    if cfg.setup != setup {
                        return Err(Error::config("setup", format!("config is for setup {}, not {setup}", cfg.setup)));
                    }
                    cfg
                }
                None => preset(setup),
            };
            apply_overrides(&mut cfg, &run)?;
            if constrained {
                cfg.method = Method::Constrained;
            }
            let mut out = Outputs::new(&common.out, &format!("replicate {setup}"));
            if let Some(path) = &config {
                out.input(path);
            }
            out.config(&cfg)?;
            let result = replicate(&cfg)?;
            out.json("summary.json", &result.summary)?;
            for (name, table) in &result.tables {
                out.text(name, table)?;
            }
            println!("{}", result.summary.render());
            out.finish()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
