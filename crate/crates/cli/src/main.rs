use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use impromptu::bench::{
    alpha_sweep, fitted_budget, ingest_csv_trajectory, prepare_inverse, run_comparison, run_strategies,
    train_source_inverse, write_step_log_csv, write_step_log_json, write_trajectory_csv, ExperimentConfig,
    RunReport, RunStatus, Strategy, StrategyOutcome,
};
use impromptu::stability::{PredictionBudget, StabilityReport};
use impromptu::{Error, Result};

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "impromptu",
    version,
    about = "Transfer a learned inverse model to a new system and correct it online"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML). Defaults to the two-system study.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for logs and reports.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Format of step logs and trajectories. Reports are always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Baseline,
    Offline,
    Full,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Baseline => Strategy::Baseline,
            StrategyArg::Offline => Strategy::Offline,
            StrategyArg::Full => Strategy::Full,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy on the target and write its step log.
    Simulate {
        #[arg(long, value_enum, default_value = "full")]
        strategy: StrategyArg,
    },
    /// Run baseline, offline and full strategies side by side.
    Compare,
    /// Run the full strategy at several fixed gains and check each against
    /// the boundedness condition.
    SweepAlpha {
        /// Comma-separated gains.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_negative_numbers = true)]
        alphas: Vec<f64>,
    },
    /// Similarity, ISS gains and the boundedness check for the configured
    /// pair.
    Similarity {
        /// Gain to check.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        alpha: f64,
        /// Fit the prediction-error envelope from a full run instead of
        /// assuming perfect predictions.
        #[arg(long)]
        fit_budget: bool,
    },
    /// Train the inverse network on source traces and save it.
    TrainInverse {
        /// Where to save the network. Defaults to `<out-dir>/inverse.mlp`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Read a trajectory CSV and resample it onto the simulation grid.
    Ingest {
        input: PathBuf,
        /// Output column to use (default `yd`, or the only one).
        #[arg(long)]
        column: Option<String>,
        /// Sampling period in seconds (default: the configured one).
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Csv(e) if e.is_io_error() => EXIT_IO,
        e if e.is_divergence() => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_log(dir: &Path, outcome: &StrategyOutcome, format: Format) -> Result<PathBuf> {
    let path = dir.join(format!("{}.{}", outcome.strategy.name(), format.ext()));
    let w = create(&path)?;
    match format {
        Format::Csv => write_step_log_csv(w, &outcome.rows)?,
        Format::Json => write_step_log_json(w, &outcome.rows)?,
    }
    Ok(path)
}

fn print_summary(report: &RunReport) {
    out!(
        "{:<10} {:>10} {:>14} {:>14}",
        "strategy",
        "status",
        "rms_tracking",
        "rms_prediction"
    );
    for o in &report.strategies {
        let status = match &o.status {
            RunStatus::Completed => "ok".to_string(),
            RunStatus::Diverged { step, .. } => format!("div@{step}"),
        };
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
        out!(
            "{:<10} {:>10} {:>14} {:>14}",
            o.strategy.name(),
            status,
            fmt(o.metrics.map(|m| m.headline(report.config.startup_exclusion))),
            fmt(o.metrics.and_then(|m| m.rms_prediction)),
        );
    }
    out!("digest {}", report.digest);
}

/// Writes every step log and the report; exit code 3 if a run diverged.
fn finish_run(report: &RunReport, common: &Common) -> Result<u8> {
    for outcome in &report.strategies {
        write_log(&common.out_dir, outcome, common.format)?;
    }
    write_json(&common.out_dir.join("report.json"), report)?;
    print_summary(report);
    let diverged = report.strategies.iter().any(|o| !o.status.is_bounded());
    Ok(if diverged { EXIT_DIVERGED } else { 0 })
}

fn run(cli: Cli) -> Result<u8> {
    let common = &cli.common;
    let config = load_config(common)?;
    std::fs::create_dir_all(&common.out_dir).map_err(|e| Error::io(&common.out_dir, e))?;
    match cli.command {
        Command::Simulate { strategy } => {
            let (inverse, training) = prepare_inverse(&config)?;
            let report = run_strategies(&config, &inverse, training, &[strategy.into()])?;
            finish_run(&report, common)
        }
        Command::Compare => {
            let report = run_comparison(&config)?;
            finish_run(&report, common)
        }
        Command::SweepAlpha { alphas } => {
            let (inverse, _) = prepare_inverse(&config)?;
            let report = alpha_sweep(&config, &inverse, &alphas)?;
            write_json(&common.out_dir.join("sweep.json"), &report)?;
            out!("beta4 {:.6e}  alpha_max {:?}", report.beta4, report.alpha_max);
            for p in &report.points {
                let status = if p.status.is_bounded() {
                    "bounded"
                } else {
                    "diverged"
                };
                out!(
                    "alpha {:>10.4}  {:<8}  {:?}  rms {:?}",
                    p.alpha,
                    status,
                    p.check.verdict,
                    p.rms_tracking
                );
            }
            Ok(0)
        }
        Command::Similarity { alpha, fit_budget } => {
            let (source, target) = config.systems()?;
            let prediction = if fit_budget {
                let (inverse, _) = prepare_inverse(&config)?;
                fitted_budget(&config, &inverse)?.0.prediction
            } else {
                PredictionBudget::default()
            };
            let report = StabilityReport::new(&source, &target, prediction, alpha, config.iss_tolerance)?;
            write_json(&common.out_dir.join("stability.json"), &report)?;
            out!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
        Command::TrainInverse { output } => {
            let (model, report) = train_source_inverse(&config)?;
            let path = output.unwrap_or_else(|| common.out_dir.join("inverse.mlp"));
            model.save(create(&path)?)?;
            write_json(&common.out_dir.join("training.json"), &report)?;
            out!(
                "trained {} epochs, validation rmse {:.4e}, saved to {}",
                report.epochs_run,
                report.validation_rmse,
                path.display()
            );
            Ok(0)
        }
        Command::Ingest { input, column, dt } => {
            let dt = dt.unwrap_or(config.trajectory.dt);
            let spec = ingest_csv_trajectory(&input, column.as_deref(), dt)?;
            let reference = spec.sample(0)?;
            let path = common.out_dir.join(format!("trajectory.{}", common.format.ext()));
            let w = create(&path)?;
            match common.format {
                Format::Csv => write_trajectory_csv(w, &reference)?,
                Format::Json => serde_json::to_writer(w, &reference.samples)?,
            }
            out!(
                "{} samples at dt = {dt} written to {}",
                reference.samples.len(),
                path.display()
            );
            Ok(0)
        }
    }
}
