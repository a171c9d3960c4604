//! Command-line front end for the exml library.
//!
//! Subcommands: `synth` (write a synthetic dataset), `run` (execute an
//! experiment and write report + model files), `rank` (compute the
//! reference feature ranking), `report` (summarize a report.json), and
//! `predict` (batch cascade prediction on a CSV).
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime
//! error.

mod predict;
mod rank;
mod report;
mod run;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exml::acquisition::AllocationStrategy;
use exml::harness::{ExperimentConfig, VariantKind};

/// A failed command, tagged with which exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation or configuration: exit 1.
    Usage(String),
    /// The command itself failed: exit 2.
    Runtime(String),
}

pub type CmdResult = Result<(), Failure>;

pub fn usage(err: impl std::fmt::Display) -> Failure {
    Failure::Usage(err.to_string())
}

pub fn runtime(err: impl std::fmt::Display) -> Failure {
    Failure::Runtime(err.to_string())
}

#[derive(Parser)]
#[command(
    name = "exml",
    version,
    about = "Exploratory machine learning: rejection models, budgeted feature acquisition, cascades"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV files.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for the dataset files.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run the configured experiment; write report and model files.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for report and model files.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Cap on worker threads.
        #[arg(long, value_name = "N")]
        threads: Option<usize>,
    },
    /// Rank candidate features by three-way accuracy on the test split.
    Rank {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for ranking.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Cap on worker threads.
        #[arg(long, value_name = "N")]
        threads: Option<usize>,
    },
    /// Print a human-readable summary of an experiment report.
    Report {
        /// A report.json file, or a directory containing one.
        #[arg(value_name = "PATH")]
        path: PathBuf,
    },
    /// Batch cascade prediction over a CSV of samples.
    Predict {
        /// Model directory written by `run` (initial.json, cascade_*.json, meta.json).
        #[arg(value_name = "MODELS_DIR")]
        models: PathBuf,
        /// Input CSV with the observed columns (and, for layer 2, the
        /// selected feature's columns).
        #[arg(value_name = "INPUT_CSV")]
        input: PathBuf,
        /// Output directory for predictions.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Which strategy's cascade to use when several were saved.
        #[arg(long, value_name = "NAME")]
        strategy: Option<StrategyArg>,
        /// Score every sample with the augmented model instead of
        /// cascading; requires the feature columns for all rows.
        #[arg(long)]
        augment_all: bool,
    },
}

/// Flags shared by every config-driven subcommand.
#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed override.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

/// Scalar overrides for `run`; everything else comes from the config.
#[derive(Args)]
struct Overrides {
    /// Comma-separated subset of SL,EXML_AUG,EXML_CSD.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// Restrict acquisition to one strategy.
    #[arg(long, value_name = "NAME")]
    strategy: Option<StrategyArg>,
    /// Budget ratio override in [0, 1].
    #[arg(long, value_name = "F")]
    budget_ratio: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Uniform,
    #[value(alias = "median_elimination")]
    Median,
}

impl From<StrategyArg> for AllocationStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Uniform => AllocationStrategy::Uniform,
            StrategyArg::Median => AllocationStrategy::MedianElimination,
        }
    }
}

fn parse_variant(name: &str) -> Result<VariantKind, Failure> {
    let upper = name.trim().to_ascii_uppercase();
    [VariantKind::Sl, VariantKind::ExmlAug, VariantKind::ExmlCsd]
        .into_iter()
        .find(|v| v.as_str() == upper)
        .ok_or_else(|| {
            Failure::Usage(format!(
                "unknown variant '{name}' (expected SL, EXML_AUG, or EXML_CSD)"
            ))
        })
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        Failure::Usage(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let mut config = ExperimentConfig::from_json(&text)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn apply_overrides(config: &mut ExperimentConfig, o: &Overrides) -> CmdResult {
    if let Some(names) = &o.variants {
        let mut variants = Vec::with_capacity(names.len());
        for name in names {
            variants.push(parse_variant(name)?);
        }
        config.variants = variants;
    }
    if let Some(strategy) = o.strategy {
        config.acquisition.strategies = vec![strategy.into()];
    }
    if let Some(ratio) = o.budget_ratio {
        config.acquisition.budget_ratio = ratio;
    }
    // Overrides can invalidate a config that parsed fine.
    config.validate().map_err(usage)
}

fn configure_threads(threads: Option<usize>) -> CmdResult {
    match threads {
        Some(n) if n == 0 => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => exml::configure_threads(n).map_err(usage),
        None => Ok(()),
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Synth { config, out } => {
            let config = load_config(&config)?;
            synth::cmd_synth(&config, &out)
        }
        Command::Run {
            config,
            out,
            overrides,
            threads,
        } => {
            let mut config = load_config(&config)?;
            apply_overrides(&mut config, &overrides)?;
            configure_threads(threads)?;
            run::cmd_run(&config, &out)
        }
        Command::Rank {
            config,
            out,
            threads,
        } => {
            let config = load_config(&config)?;
            configure_threads(threads)?;
            rank::cmd_rank(&config, &out)
        }
        Command::Report { path } => report::cmd_report(&path),
        Command::Predict {
            models,
            input,
            out,
            strategy,
            augment_all,
        } => predict::cmd_predict(&models, &input, &out, strategy.map(Into::into), augment_all),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; they exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
