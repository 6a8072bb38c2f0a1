//! Persistence of fitted models as a single human-readable TOML document.
//!
//! Floats are written with 17 significant digits, which is enough for every
//! f64 to survive the decimal round trip bit for bit. The locally weighted
//! variant's "model" is its training set, so that document embeds the
//! feature matrix, responses, and the distance standardization.

use ndarray::{Array1, Array2};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lw::{DistanceMetric, Weighting};
use crate::plsr::{PlsrModel, ScalingSpec};
use crate::transforms::LogTransformSpec;
use crate::validation::{FittedInner, FittedModel, LwModel, LwParams, ModelSpec, Variant};

pub const MODEL_DOC_VERSION: u32 = 1;

/// Component-selection settings echoed into the document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMeta {
    pub tolerance: f64,
    pub max_components: usize,
}

/// A fitted model plus the metadata needed to apply it to new feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub fitted: FittedModel,
    pub n_features: usize,
    pub selection: Option<SelectionMeta>,
}

fn require_finite(name: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        if !v.is_finite() {
            return Err(Error::ModelDoc(format!("{name} contains non-finite value {v}")));
        }
    }
    Ok(())
}

fn push_float(out: &mut String, key: &str, value: f64) {
    out.push_str(&format!("{key} = {value:.16e}\n"));
}

fn push_array(out: &mut String, key: &str, values: &Array1<f64>) {
    out.push_str(key);
    out.push_str(" = [");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("{v:.16e}"));
    }
    out.push_str("]\n");
}

fn push_rows(out: &mut String, key: &str, rows: impl Iterator<Item = Vec<f64>>) {
    out.push_str(key);
    out.push_str(" = [\n");
    for row in rows {
        out.push_str("  [");
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("{v:.16e}"));
        }
        out.push_str("],\n");
    }
    out.push_str("]\n");
}

fn push_scaling(out: &mut String, scaling: &ScalingSpec) {
    out.push_str("\n[scaling]\n");
    out.push_str(&format!("center_x = {}\n", scaling.center_x));
    out.push_str(&format!("scale_x = {}\n", scaling.scale_x));
    out.push_str(&format!("center_y = {}\n", scaling.center_y));
}

fn push_plsr(out: &mut String, model: &PlsrModel) -> Result<()> {
    require_finite("x_mean", model.x_mean.iter().copied())?;
    require_finite("x_scale", model.x_scale.iter().copied())?;
    require_finite("coefficients", model.coefficients.iter().copied())?;
    require_finite("weights", model.weights.iter().copied())?;
    require_finite("x_loadings", model.x_loadings.iter().copied())?;
    require_finite("y_loadings", model.y_loadings.iter().copied())?;
    require_finite("scalars", [model.y_mean, model.intercept])?;

    out.push_str("\n[plsr]\n");
    out.push_str(&format!("n_components = {}\n", model.n_components));
    out.push_str(&format!("requested_components = {}\n", model.requested_components));
    out.push_str(&format!("degenerate = {}\n", model.degenerate));
    push_float(out, "y_mean", model.y_mean);
    push_float(out, "intercept", model.intercept);
    push_array(out, "x_mean", &model.x_mean);
    push_array(out, "x_scale", &model.x_scale);
    push_array(out, "coefficients", &model.coefficients);
    push_array(out, "y_loadings", &model.y_loadings);
    // One inner array per component, each carrying the full feature axis.
    push_rows(out, "weights", (0..model.n_components).map(|a| model.weights.column(a).to_vec()));
    push_rows(
        out,
        "x_loadings",
        (0..model.n_components).map(|a| model.x_loadings.column(a).to_vec()),
    );
    Ok(())
}

/// Serializes a model document to TOML text.
pub fn write_model_doc(doc: &ModelDocument) -> Result<String> {
    let spec = &doc.fitted.spec;
    let mut out = String::new();
    out.push_str(&format!("format_version = {MODEL_DOC_VERSION}\n"));
    out.push_str(&format!("variant = \"{}\"\n", spec.variant));
    out.push_str(&format!("n_features = {}\n", doc.n_features));

    push_scaling(&mut out, &spec.scaling);

    if let Some(selection) = &doc.selection {
        out.push_str("\n[selection]\n");
        push_float(&mut out, "tolerance", selection.tolerance);
        out.push_str(&format!("max_components = {}\n", selection.max_components));
    }

    match &doc.fitted.inner {
        FittedInner::Plsr { model, log } => {
            push_plsr(&mut out, model)?;
            if let Some(log) = log {
                require_finite("shift", [log.shift])?;
                out.push_str("\n[log]\n");
                push_float(&mut out, "shift", log.shift);
                let mask: Vec<String> =
                    log.feature_log_mask.iter().map(|m| m.to_string()).collect();
                out.push_str(&format!("feature_log_mask = [{}]\n", mask.join(", ")));
            }
        }
        FittedInner::Lw(lw) => {
            let params = spec.lw.ok_or_else(|| {
                Error::ModelDoc("locally weighted model without neighborhood parameters".into())
            })?;
            require_finite("train_x", lw.train_x.iter().copied())?;
            require_finite("train_y", lw.train_y.iter().copied())?;
            require_finite("x_mean", lw.x_mean.iter().copied())?;
            require_finite("x_scale", lw.x_scale.iter().copied())?;

            out.push_str("\n[lw]\n");
            out.push_str(&format!("k = {}\n", params.k));
            out.push_str(&format!("n_components = {}\n", spec.n_components));
            let distance = match params.distance {
                DistanceMetric::Euclidean => "euclidean",
                DistanceMetric::Manhattan => "manhattan",
            };
            let weighting = match params.weighting {
                Weighting::Uniform => "uniform",
                Weighting::Tricube => "tricube",
            };
            out.push_str(&format!("distance = \"{distance}\"\n"));
            out.push_str(&format!("weighting = \"{weighting}\"\n"));
            push_array(&mut out, "x_mean", &lw.x_mean);
            push_array(&mut out, "x_scale", &lw.x_scale);
            push_array(&mut out, "train_y", &lw.train_y);
            push_rows(&mut out, "train_x", lw.train_x.rows().into_iter().map(|r| r.to_vec()));
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRoot {
    format_version: u32,
    variant: String,
    n_features: usize,
    scaling: ScalingSpec,
    selection: Option<DocSelection>,
    plsr: Option<DocPlsr>,
    log: Option<LogTransformSpec>,
    lw: Option<DocLw>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocSelection {
    tolerance: f64,
    max_components: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocPlsr {
    n_components: usize,
    requested_components: usize,
    degenerate: bool,
    y_mean: f64,
    intercept: f64,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    coefficients: Vec<f64>,
    y_loadings: Vec<f64>,
    weights: Vec<Vec<f64>>,
    x_loadings: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocLw {
    k: usize,
    n_components: usize,
    distance: DistanceMetric,
    weighting: Weighting,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    train_y: Vec<f64>,
    train_x: Vec<Vec<f64>>,
}

fn columns_to_matrix(name: &str, columns: &[Vec<f64>], rows: usize) -> Result<Array2<f64>> {
    for column in columns {
        if column.len() != rows {
            return Err(Error::ModelDoc(format!(
                "{name}: expected columns of length {rows}, found {}",
                column.len()
            )));
        }
    }
    Ok(Array2::from_shape_fn((rows, columns.len()), |(i, j)| columns[j][i]))
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>], width: usize) -> Result<Array2<f64>> {
    for row in rows {
        if row.len() != width {
            return Err(Error::ModelDoc(format!(
                "{name}: expected rows of width {width}, found {}",
                row.len()
            )));
        }
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), data)
        .map_err(|e| Error::ModelDoc(format!("{name}: {e}")))
}

/// Parses a model document written by [`write_model_doc`].
pub fn read_model_doc(text: &str) -> Result<ModelDocument> {
    let root: DocRoot =
        toml::from_str(text).map_err(|e| Error::ModelDoc(format!("parse failure: {e}")))?;
    if root.format_version != MODEL_DOC_VERSION {
        return Err(Error::ModelDoc(format!(
            "unsupported format_version {} (expected {MODEL_DOC_VERSION})",
            root.format_version
        )));
    }
    let variant: Variant = root.variant.parse()?;
    let p = root.n_features;

    let selection = root
        .selection
        .map(|s| SelectionMeta { tolerance: s.tolerance, max_components: s.max_components });

    let fitted = match variant {
        Variant::RawPlsr | Variant::LogPlsr => {
            let doc = root.plsr.ok_or_else(|| {
                Error::ModelDoc(format!("variant {variant} requires a [plsr] section"))
            })?;
            if root.lw.is_some() {
                return Err(Error::ModelDoc(format!(
                    "variant {variant} must not carry an [lw] section"
                )));
            }
            let log = match (variant, root.log) {
                (Variant::LogPlsr, Some(log)) => {
                    if log.feature_log_mask.len() != p {
                        return Err(Error::ModelDoc(format!(
                            "feature_log_mask has {} entries for {p} features",
                            log.feature_log_mask.len()
                        )));
                    }
                    Some(log)
                }
                (Variant::LogPlsr, None) => {
                    return Err(Error::ModelDoc("log_plsr requires a [log] section".into()));
                }
                (_, Some(_)) => {
                    return Err(Error::ModelDoc(
                        "raw_plsr must not carry a [log] section".into(),
                    ));
                }
                (_, None) => None,
            };
            for (name, values) in [
                ("x_mean", &doc.x_mean),
                ("x_scale", &doc.x_scale),
                ("coefficients", &doc.coefficients),
            ] {
                if values.len() != p {
                    return Err(Error::ModelDoc(format!(
                        "{name} has {} entries for {p} features",
                        values.len()
                    )));
                }
            }
            if doc.y_loadings.len() != doc.n_components
                || doc.weights.len() != doc.n_components
                || doc.x_loadings.len() != doc.n_components
            {
                return Err(Error::ModelDoc(
                    "component arrays disagree with n_components".into(),
                ));
            }
            let model = PlsrModel {
                n_components: doc.n_components,
                requested_components: doc.requested_components,
                degenerate: doc.degenerate,
                scaling: root.scaling,
                x_mean: Array1::from_vec(doc.x_mean),
                x_scale: Array1::from_vec(doc.x_scale),
                y_mean: doc.y_mean,
                weights: columns_to_matrix("weights", &doc.weights, p)?,
                x_loadings: columns_to_matrix("x_loadings", &doc.x_loadings, p)?,
                y_loadings: Array1::from_vec(doc.y_loadings),
                coefficients: Array1::from_vec(doc.coefficients),
                intercept: doc.intercept,
            };
            let spec = ModelSpec {
                variant,
                n_components: model.requested_components,
                scaling: root.scaling,
                log_shift: log
                    .as_ref()
                    .map_or(crate::validation::DEFAULT_LOG_SHIFT_PPB, |l| l.shift),
                lw: None,
            };
            FittedModel { spec, inner: FittedInner::Plsr { model, log } }
        }
        Variant::LwPlsr => {
            let doc = root
                .lw
                .ok_or_else(|| Error::ModelDoc("lw_plsr requires an [lw] section".into()))?;
            if root.plsr.is_some() || root.log.is_some() {
                return Err(Error::ModelDoc(
                    "lw_plsr must carry only the [lw] section".into(),
                ));
            }
            if doc.x_mean.len() != p || doc.x_scale.len() != p {
                return Err(Error::ModelDoc("standardization width disagrees with n_features".into()));
            }
            let train_x = rows_to_matrix("train_x", &doc.train_x, p)?;
            if doc.train_y.len() != train_x.nrows() {
                return Err(Error::ModelDoc(format!(
                    "train_y has {} entries for {} training rows",
                    doc.train_y.len(),
                    train_x.nrows()
                )));
            }
            let spec = ModelSpec {
                variant,
                n_components: doc.n_components,
                scaling: root.scaling,
                log_shift: crate::validation::DEFAULT_LOG_SHIFT_PPB,
                lw: Some(LwParams { k: doc.k, distance: doc.distance, weighting: doc.weighting }),
            };
            FittedModel {
                spec,
                inner: FittedInner::Lw(LwModel {
                    train_x,
                    train_y: Array1::from_vec(doc.train_y),
                    x_mean: Array1::from_vec(doc.x_mean),
                    x_scale: Array1::from_vec(doc.x_scale),
                }),
            }
        }
    };

    Ok(ModelDocument { fitted, n_features: p, selection })
}
