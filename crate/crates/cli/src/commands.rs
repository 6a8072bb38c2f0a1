//! Implementations of the five subcommands. All file outputs are written to
//! a temporary sibling first and renamed into place, so readers never see a
//! half-written artifact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gasquant::csv_io;
use gasquant::lw::{DistanceMetric, LwConfig, Weighting};
use gasquant::model_doc::{self, ModelDocument, SelectionMeta};
use gasquant::plsr::ScalingSpec;
use gasquant::synth::SynthConfig;
use gasquant::validation::{
    build_report, fit_model, select_components, ModelReport, ModelSpec, Variant,
};
use gasquant::{Error, FeatureMatrix, Result};
use serde::Serialize;

use crate::{Cli, Command, FeaturesArgs, FitArgs, ModelOpts, PredictArgs, SynthArgs, ValidateArgs};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Features(args) => cmd_features(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Predict(args) => cmd_predict(args),
    }
}

/// Writes to a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, work: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => work(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build a {n}-thread pool: {e}")))?;
            pool.install(work)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = read_to_string(path)?;
            toml::from_str::<SynthConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) if name == "paper" => SynthConfig::paper_preset(args.seed.unwrap_or(0)),
        (None, Some(other)) => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available preset: paper"
            )));
        }
        // clap enforces exactly one of --config/--preset
        _ => unreachable!("argument parsing guarantees a source"),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    let cycles = gasquant::generate(&config)?;
    let mut buffer = Vec::new();
    csv_io::write_cycles_csv(&mut buffer, &cycles)?;
    write_atomic(&args.out, &buffer)?;

    if let Some(config_out) = &args.emit_config {
        let text = toml::to_string_pretty(&config)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
        write_atomic(config_out, text.as_bytes())?;
    }

    eprintln!(
        "synth: {} cycles x {} samples (seed {}) -> {}",
        cycles.len(),
        config.cycle_len(),
        config.seed,
        args.out.display()
    );
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> Result<()> {
    let file = fs::File::open(&args.input)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", args.input.display())))?;
    let cycles = csv_io::read_cycles_csv(file)?;
    if cycles.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} contains no cycles",
            args.input.display()
        )));
    }
    let config = gasquant::FeatureConfig::new(args.segments)?;
    let matrix = gasquant::build_feature_matrix(&cycles, &config)?;

    let mut buffer = Vec::new();
    csv_io::write_features_csv(&mut buffer, &matrix)?;
    write_atomic(&args.out, &buffer)?;
    eprintln!(
        "features: {} cycles -> {} x {} matrix -> {}",
        cycles.len(),
        matrix.n_samples(),
        matrix.n_features(),
        args.out.display()
    );
    Ok(())
}

fn scaling_from_opts(opts: &ModelOpts) -> ScalingSpec {
    ScalingSpec {
        center_x: !opts.no_center_x,
        scale_x: !opts.no_scale_x,
        center_y: !opts.no_center_y,
    }
}

fn parse_distance(name: &str) -> Result<DistanceMetric> {
    match name {
        "euclidean" => Ok(DistanceMetric::Euclidean),
        "manhattan" => Ok(DistanceMetric::Manhattan),
        other => Err(Error::Config(format!(
            "unknown distance {other:?}; expected euclidean or manhattan"
        ))),
    }
}

fn parse_weighting(name: &str) -> Result<Weighting> {
    match name {
        "uniform" => Ok(Weighting::Uniform),
        "tricube" => Ok(Weighting::Tricube),
        other => Err(Error::Config(format!(
            "unknown weighting {other:?}; expected uniform or tricube"
        ))),
    }
}

fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let matrix = csv_io::read_features_csv(file)?;
    if matrix.n_samples() == 0 {
        return Err(Error::EmptyInput(format!("{} contains no rows", path.display())));
    }
    Ok(matrix)
}

/// Builds the model spec template for one variant, resolving the
/// neighborhood size when the variant needs one.
fn spec_template(
    variant: Variant,
    opts: &ModelOpts,
    matrix: &FeatureMatrix,
) -> Result<ModelSpec> {
    let mut spec = ModelSpec::new(variant, 1);
    spec.scaling = scaling_from_opts(opts);
    spec.log_shift = opts.shift;
    if variant == Variant::LwPlsr {
        let distance = parse_distance(&opts.distance)?;
        let weighting = parse_weighting(&opts.weighting)?;
        let k = match opts.k {
            Some(k) => k,
            None => {
                let y = matrix.training_y()?;
                let probe = LwConfig { k: 2, n_components: 1, distance, weighting };
                let k = gasquant::choose_k(&matrix.x.view(), &y.view(), &probe)?;
                eprintln!("lw_plsr: neighborhood rule selected k = {k}");
                k
            }
        };
        spec.lw = Some(gasquant::LwParams { k, distance, weighting });
    }
    Ok(spec)
}

/// Runs component selection for the template and returns the final spec
/// plus the selection record.
fn select_for(
    matrix: &FeatureMatrix,
    template: &ModelSpec,
    opts: &ModelOpts,
) -> Result<(ModelSpec, gasquant::Selection)> {
    let y = matrix.training_y()?;
    let max_components = opts.max_components.unwrap_or_else(|| matrix.n_features());
    let selection = select_components(
        &matrix.x.view(),
        &y.view(),
        template,
        max_components,
        opts.tolerance,
    )?;
    eprintln!(
        "{}: selected {} of up to {max_components} components (tolerance {})",
        template.variant, selection.n_components, opts.tolerance
    );
    Ok((template.with_components(selection.n_components), selection))
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let variant: Variant = args.variant.parse()?;
    let matrix = read_features(&args.features)?;
    let y = matrix.training_y()?;

    with_threads(args.model.threads, || {
        let template = spec_template(variant, &args.model, &matrix)?;
        let (spec, selection) = select_for(&matrix, &template, &args.model)?;
        let fitted = fit_model(&spec, &matrix.x.view(), &y.view())?;
        let doc = ModelDocument {
            fitted,
            n_features: matrix.n_features(),
            selection: Some(SelectionMeta {
                tolerance: selection.tolerance,
                max_components: selection.max_components,
            }),
        };
        let text = model_doc::write_model_doc(&doc)?;
        write_atomic(&args.out, text.as_bytes())?;
        eprintln!(
            "fit: {variant} with {} components -> {}",
            spec.n_components,
            args.out.display()
        );
        Ok(())
    })
}

#[derive(Serialize)]
struct SummaryRow {
    variant: Variant,
    n_components: usize,
    rmse: f64,
    rmsecv: f64,
    rmsem: f64,
    uncertainty: f64,
}

#[derive(Serialize)]
struct Summary {
    schema_version: u32,
    rows: Vec<SummaryRow>,
}

fn report_json(report: &ModelReport) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn plot_bytes(report: &ModelReport) -> Result<Vec<u8>> {
    let mut buffer = Vec::new();
    csv_io::write_plot_csv(&mut buffer, &report.groups)?;
    Ok(buffer)
}

/// `reports.json` -> `reports.raw_plsr.json` and friends.
fn derived_path(base: &Path, tag: &str, extension: &str) -> PathBuf {
    let stem = base.file_stem().unwrap_or_default().to_string_lossy().to_string();
    let name = format!("{stem}.{tag}.{extension}");
    base.with_file_name(name)
}

fn validate_one(
    matrix: &FeatureMatrix,
    variant: Variant,
    opts: &ModelOpts,
) -> Result<ModelReport> {
    let template = spec_template(variant, opts, matrix)?;
    let (spec, selection) = select_for(matrix, &template, opts)?;
    build_report(matrix, &spec, Some(selection))
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let matrix = read_features(&args.features)?;

    with_threads(args.model.threads, || {
        if args.variant == "all" {
            let mut rows = Vec::new();
            for variant in Variant::ALL {
                let report = validate_one(&matrix, variant, &args.model)?;
                let report_path = derived_path(&args.report, variant.as_str(), "json");
                write_atomic(&report_path, &report_json(&report)?)?;
                let plot_path = derived_path(&args.report, variant.as_str(), "plot.csv");
                write_atomic(&plot_path, &plot_bytes(&report)?)?;
                eprintln!("validate: {variant} report -> {}", report_path.display());
                rows.push(SummaryRow {
                    variant,
                    n_components: report.n_components,
                    rmse: report.rmse,
                    rmsecv: report.rmsecv,
                    rmsem: report.rmsem,
                    uncertainty: report.uncertainty,
                });
            }

            eprintln!(
                "{:<10} {:>4} {:>12} {:>12} {:>12} {:>12}",
                "variant", "A", "rmse", "rmsecv", "rmsem", "uncertainty"
            );
            for row in &rows {
                eprintln!(
                    "{:<10} {:>4} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
                    row.variant.as_str(),
                    row.n_components,
                    row.rmse,
                    row.rmsecv,
                    row.rmsem,
                    row.uncertainty
                );
            }

            let summary = Summary { schema_version: 1, rows };
            let mut text = serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::Config(format!("cannot serialize summary: {e}")))?;
            text.push('\n');
            let summary_path = derived_path(&args.report, "summary", "json");
            write_atomic(&summary_path, text.as_bytes())?;
            eprintln!("validate: summary -> {}", summary_path.display());
        } else {
            let variant: Variant = args.variant.parse()?;
            let report = validate_one(&matrix, variant, &args.model)?;
            write_atomic(&args.report, &report_json(&report)?)?;
            let plot_path = args
                .plot
                .clone()
                .unwrap_or_else(|| derived_path(&args.report, "plot", "csv"));
            write_atomic(&plot_path, &plot_bytes(&report)?)?;
            eprintln!(
                "validate: {variant} rmse {:.4} rmsecv {:.4} rmsem {:.4} uncertainty {:.4}",
                report.rmse, report.rmsecv, report.rmsem, report.uncertainty
            );
            eprintln!("validate: report -> {}", args.report.display());
        }
        Ok(())
    })
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let text = read_to_string(&args.model)?;
    let doc = model_doc::read_model_doc(&text)?;
    let matrix = read_features(&args.features)?;
    if matrix.n_features() != doc.n_features {
        return Err(Error::DimensionMismatch {
            expected: doc.n_features,
            got: matrix.n_features(),
        });
    }

    let predictions = doc.fitted.predict(&matrix.x.view()).map_err(|err| match err {
        // Name the offending cycle, not just the row index.
        Error::NonPositiveForLog { row, column, value } => Error::InvalidCycle {
            cycle_id: matrix.cycle_ids[row],
            reason: format!(
                "feature column {column} has non-positive value {value}, \
                 which the log-transformed model cannot accept"
            ),
        },
        other => other,
    })?;

    let mut buffer = Vec::new();
    csv_io::write_predictions_csv(
        &mut buffer,
        &matrix.cycle_ids,
        &matrix.labels,
        predictions.as_slice().expect("contiguous predictions"),
    )?;
    write_atomic(&args.out, &buffer)?;
    eprintln!(
        "predict: {} rows -> {}",
        matrix.n_samples(),
        args.out.display()
    );
    Ok(())
}
