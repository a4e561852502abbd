//! `rfm` — build fingerprint maps, localize queries robustly, and detect
//! environment changes, end to end from CSV datasets.
//!
//! Every subcommand accepts `--config` (TOML), `--seed`, and `--out-dir`,
//! layering configuration as defaults < file < `RFM_*` environment
//! variables < flags, and stamps its output directory with
//! `manifest.json` + `effective-config.toml`. Outputs are byte-reproducible
//! for fixed inputs, configuration, and seed.
//!
//! Exit codes: 0 success, 1 usage/invalid input, 2 I/O or parse failure,
//! 3 numerical failure.

mod commands;
mod config;
mod manifest;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rfm_core::{DatasetFormat, Error, Result};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "rfm",
    version,
    about = "Robust fingerprint positioning and change detection pipeline",
    after_help = "Environment: RFM_CONFIG points at a config file when --config is absent; \
                  RFM_SEED, RFM_GRID_SPACING_M, RFM_QUERY_SCALE, RFM_K, and \
                  RFM_DETECT_THRESHOLD override the matching config keys."
)]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Configuration file (TOML); RFM_CONFIG is consulted when absent
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed of every randomized step (overrides the file and RFM_SEED)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Directory the outputs are written into (created when missing)
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic survey scenario (training, validation, layout)
    Simulate,
    /// Build a reference map from a survey dataset: smooth, grid, serialize
    BuildRfm(DatasetArgs),
    /// Inject feature changes into a query dataset (one spec or the grid)
    Inject(InjectArgs),
    /// Baseline kNN localization of every query against the map
    Localize(QueryArgs),
    /// Resampling-consensus localization with candidate reporting
    RobustLocalize(QueryArgs),
    /// Per-feature change beliefs for every query
    Detect(QueryArgs),
    /// Label long-term data per time block with robust statistics
    Label(LabelArgs),
    /// Positioning quality metrics, optionally with detection quality
    Evaluate(EvaluateArgs),
    /// Sampling-ratio sweep of dispersiveness, bias, and 3 dB bandwidth
    Sweep(QueryArgs),
}

/// Arguments of commands that read one dataset file.
#[derive(Args)]
struct DatasetArgs {
    /// Survey dataset (CSV)
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,

    /// Dataset shape: wide, long, or auto
    #[arg(long, value_name = "SHAPE", default_value = "auto", value_parser = parse_format)]
    format: DatasetFormat,
}

/// Arguments of commands that match queries against a built map.
#[derive(Args)]
struct QueryArgs {
    /// Directory holding a map built by `build-rfm`
    #[arg(long, value_name = "DIR")]
    rfm: PathBuf,

    /// Query dataset (CSV)
    #[arg(long, value_name = "FILE")]
    queries: PathBuf,

    /// Query dataset shape: wide, long, or auto
    #[arg(long, value_name = "SHAPE", default_value = "auto", value_parser = parse_format)]
    format: DatasetFormat,
}

#[derive(Args)]
struct InjectArgs {
    #[command(flatten)]
    dataset: DatasetArgs,

    /// Fraction of features removed per query
    #[arg(long, value_name = "RATIO")]
    missing_ratio: Option<f64>,

    /// Fraction of features shifted per query
    #[arg(long, value_name = "RATIO")]
    shift_ratio: Option<f64>,

    /// Offset added to shifted features (dBm, typically negative)
    #[arg(long, value_name = "DBM", allow_negative_numbers = true)]
    shift_dbm: Option<f64>,

    /// Emit every change combination of the evaluation grid instead
    #[arg(long, conflicts_with_all = ["missing_ratio", "shift_ratio", "shift_dbm"])]
    full_grid: bool,
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    dataset: DatasetArgs,

    /// Block compared against (default: the lowest block id per location)
    #[arg(long, value_name = "BLOCK")]
    reference_block: Option<u32>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    query: QueryArgs,

    /// Change labels produced by `inject`, enabling detection metrics
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
}

fn parse_format(raw: &str) -> std::result::Result<DatasetFormat, String> {
    raw.parse::<DatasetFormat>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are successful exits; everything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Exit code of a failed run: 1 usage/invalid input, 2 parse or I/O,
/// 3 numerical.
fn exit_code(error: &Error) -> u8 {
    match error {
        Error::InvalidInput(_) => 1,
        Error::Parse { .. } | Error::Io(_) => 2,
        Error::Numerical(_) => 3,
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::layered(cli.globals.config.as_deref(), cli.globals.seed)?;
    let out_dir = cli.globals.out_dir;
    fs::create_dir_all(&out_dir)?;
    let command_name = match &cli.command {
        Command::Simulate => "simulate",
        Command::BuildRfm(_) => "build-rfm",
        Command::Inject(_) => "inject",
        Command::Localize(_) => "localize",
        Command::RobustLocalize(_) => "robust-localize",
        Command::Detect(_) => "detect",
        Command::Label(_) => "label",
        Command::Evaluate(_) => "evaluate",
        Command::Sweep(_) => "sweep",
    };
    match cli.command {
        Command::Simulate => commands::simulate::run(&cfg, &out_dir)?,
        Command::BuildRfm(args) => {
            commands::build_rfm::run(&cfg, &out_dir, &args.dataset, args.format)?;
        }
        Command::Inject(args) => {
            let mode = if args.full_grid {
                commands::inject::Mode::FullGrid
            } else {
                commands::inject::Mode::Single {
                    missing_ratio: args.missing_ratio.unwrap_or(0.0),
                    shift_ratio: args.shift_ratio.unwrap_or(0.0),
                    shift_dbm: args.shift_dbm.unwrap_or(0.0),
                }
            };
            commands::inject::run(&cfg, &out_dir, &args.dataset.dataset, args.dataset.format, mode)?;
        }
        Command::Localize(args) => {
            commands::localize::run(&cfg, &out_dir, &args.rfm, &args.queries, args.format)?;
        }
        Command::RobustLocalize(args) => {
            commands::robust_localize::run(&cfg, &out_dir, &args.rfm, &args.queries, args.format)?;
        }
        Command::Detect(args) => {
            commands::detect::run(&cfg, &out_dir, &args.rfm, &args.queries, args.format)?;
        }
        Command::Label(args) => {
            commands::label::run(
                &cfg,
                &out_dir,
                &args.dataset.dataset,
                args.dataset.format,
                args.reference_block,
            )?;
        }
        Command::Evaluate(args) => {
            commands::evaluate::run(
                &cfg,
                &out_dir,
                &args.query.rfm,
                &args.query.queries,
                args.query.format,
                args.labels.as_deref(),
            )?;
        }
        Command::Sweep(args) => {
            commands::sweep::run(&cfg, &out_dir, &args.rfm, &args.queries, args.format)?;
        }
    }
    manifest::write_run_metadata(&out_dir, command_name, &cfg)
}
