//! Command-line front end for the quantification pipeline.
//!
//! Exit codes: 0 on success, 1 for computation failures on valid inputs
//! (unsatisfiable neighborhood rule, degenerate folds), 2 for usage, file,
//! or configuration errors. Progress and warnings go to stderr; data goes
//! only to the requested output files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "gasquant", version, about = "Trace-gas quantification from temperature-cycled sensor data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate synthetic temperature-cycle conductance data
    Synth(SynthArgs),
    /// Extract segment mean/slope features from raw cycle data
    Features(FeaturesArgs),
    /// Select a component count and fit a calibration model
    Fit(FitArgs),
    /// Cross-validate one variant (or all three) and write report files
    Validate(ValidateArgs),
    /// Apply a fitted model document to feature rows
    Predict(PredictArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Generator configuration (TOML)
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,

    /// Named preset instead of a config file (available: paper)
    #[arg(long)]
    pub preset: Option<String>,

    /// Override the configured random seed
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output CSV of raw cycles
    #[arg(long)]
    pub out: PathBuf,

    /// Also write the effective generator configuration here
    #[arg(long)]
    pub emit_config: Option<PathBuf>,

    /// Worker threads (generation itself is sequential; accepted for
    /// uniformity across commands)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args)]
pub struct FeaturesArgs {
    /// Raw cycle CSV
    #[arg(long)]
    pub input: PathBuf,

    /// Output feature CSV
    #[arg(long)]
    pub out: PathBuf,

    /// Segments per cycle
    #[arg(long, default_value_t = 10)]
    pub segments: usize,
}

/// Model options shared between `fit` and `validate`.
#[derive(Args)]
pub struct ModelOpts {
    /// Component-selection tolerance: fewest components within this
    /// relative margin of the best cross-validation error
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,

    /// Upper bound of the component search (default: feature count)
    #[arg(long)]
    pub max_components: Option<usize>,

    /// Concentration shift for the log variant, ppb
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,

    /// Neighborhood size for lw_plsr (default: smallest k giving every
    /// local model at least two distinct concentrations)
    #[arg(long)]
    pub k: Option<usize>,

    /// Distance metric for lw_plsr: euclidean or manhattan
    #[arg(long, default_value = "euclidean")]
    pub distance: String,

    /// Neighborhood weighting for lw_plsr: uniform or tricube
    #[arg(long, default_value = "uniform")]
    pub weighting: String,

    /// Skip centering feature columns
    #[arg(long)]
    pub no_center_x: bool,

    /// Skip scaling feature columns to unit variance
    #[arg(long)]
    pub no_scale_x: bool,

    /// Skip centering the concentration
    #[arg(long)]
    pub no_center_y: bool,

    /// Worker threads for cross-validation folds (default: all cores);
    /// results are identical for every thread count
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args)]
pub struct FitArgs {
    /// Training feature CSV
    #[arg(long)]
    pub features: PathBuf,

    /// Variant to fit: raw_plsr, log_plsr or lw_plsr
    #[arg(long)]
    pub variant: String,

    /// Output model document (TOML)
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub model: ModelOpts,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Training feature CSV
    #[arg(long)]
    pub features: PathBuf,

    /// Variant to evaluate, or `all` for the three-variant comparison
    #[arg(long)]
    pub variant: String,

    /// Report JSON path; with --variant all, per-variant reports and the
    /// summary derive their names from this path
    #[arg(long)]
    pub report: PathBuf,

    /// Plot-data CSV path for single-variant runs (default: report path
    /// with a .plot.csv suffix); with `all`, plot paths derive per variant
    #[arg(long)]
    pub plot: Option<PathBuf>,

    #[command(flatten)]
    pub model: ModelOpts,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Fitted model document (TOML)
    #[arg(long)]
    pub model: PathBuf,

    /// Feature CSV to predict (labels optional)
    #[arg(long)]
    pub features: PathBuf,

    /// Output predictions CSV
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
