//! Model fitting across the three calibration variants, leave-one-out
//! cross-validation, component-count selection, and performance metrics.
//!
//! Cross-validation refits everything — including centering, scaling, and
//! log masks — inside each fold so no pre-treatment parameter leaks from the
//! held-out row. Folds run in parallel but are aggregated in sample order,
//! so results do not depend on the thread count.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::lw::{DistanceMetric, LwConfig, LwPredictor, Weighting};
use crate::plsr::{self, PlsrModel, ScalingSpec};
use crate::transforms::{self, LogTransformSpec};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_LOG_SHIFT_PPB: f64 = 1.0;
pub const DEFAULT_SELECTION_TOLERANCE: f64 = 0.05;

/// Calibration variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    RawPlsr,
    LogPlsr,
    LwPlsr,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::RawPlsr, Variant::LogPlsr, Variant::LwPlsr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::RawPlsr => "raw_plsr",
            Variant::LogPlsr => "log_plsr",
            Variant::LwPlsr => "lw_plsr",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw_plsr" => Ok(Variant::RawPlsr),
            "log_plsr" => Ok(Variant::LogPlsr),
            "lw_plsr" => Ok(Variant::LwPlsr),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}; expected raw_plsr, log_plsr or lw_plsr"
            ))),
        }
    }
}

/// Neighborhood settings carried by a model spec for the locally weighted
/// variant. The component count of local models is the spec's component
/// count, selected once for all neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LwParams {
    pub k: usize,
    pub distance: DistanceMetric,
    pub weighting: Weighting,
}

impl LwParams {
    pub fn new(k: usize) -> Self {
        Self { k, distance: DistanceMetric::default(), weighting: Weighting::default() }
    }
}

/// Everything needed to refit a model from scratch on any training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub n_components: usize,
    pub scaling: ScalingSpec,
    /// Concentration shift for the log variant.
    pub log_shift: f64,
    /// Present exactly for the locally weighted variant.
    pub lw: Option<LwParams>,
}

impl ModelSpec {
    pub fn new(variant: Variant, n_components: usize) -> Self {
        Self {
            variant,
            n_components,
            scaling: ScalingSpec::default(),
            log_shift: DEFAULT_LOG_SHIFT_PPB,
            lw: None,
        }
    }

    pub fn with_components(&self, n_components: usize) -> Self {
        Self { n_components, ..self.clone() }
    }

    fn lw_config(&self) -> Result<LwConfig> {
        let params = self.lw.ok_or_else(|| {
            Error::Config("lw_plsr requires neighborhood parameters (k)".into())
        })?;
        Ok(LwConfig {
            k: params.k,
            n_components: self.n_components,
            distance: params.distance,
            weighting: params.weighting,
        })
    }
}

/// Fitted state of one variant.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedInner {
    /// Global PLSR, optionally behind a log pre-treatment.
    Plsr { model: PlsrModel, log: Option<LogTransformSpec> },
    /// Locally weighted PLSR: the "model" is the training set plus the
    /// standardization used for neighbor distances.
    Lw(LwModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LwModel {
    pub train_x: Array2<f64>,
    pub train_y: Array1<f64>,
    pub x_mean: Array1<f64>,
    pub x_scale: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub inner: FittedInner,
}

/// Fits the spec's variant on the full training set.
pub fn fit_model(spec: &ModelSpec, x: &ArrayView2<f64>, y: &ArrayView1<f64>) -> Result<FittedModel> {
    let inner = match spec.variant {
        Variant::RawPlsr => {
            let model = plsr::fit(x, y, spec.n_components, spec.scaling)?;
            FittedInner::Plsr { model, log: None }
        }
        Variant::LogPlsr => {
            let log = transforms::fit_log_spec(x, spec.log_shift)?;
            let (x_log, y_log) = transforms::apply_log(x, y, &log)?;
            let model = plsr::fit(&x_log.view(), &y_log.view(), spec.n_components, spec.scaling)?;
            FittedInner::Plsr { model, log: Some(log) }
        }
        Variant::LwPlsr => {
            let config = spec.lw_config()?;
            let predictor = LwPredictor::new(*x, *y, config, spec.scaling)?;
            FittedInner::Lw(LwModel {
                train_x: x.to_owned(),
                train_y: y.to_owned(),
                x_mean: predictor.x_mean.clone(),
                x_scale: predictor.x_scale.clone(),
            })
        }
    };
    Ok(FittedModel { spec: spec.clone(), inner })
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        match &self.inner {
            FittedInner::Plsr { model, .. } => model.n_features(),
            FittedInner::Lw(lw) => lw.train_x.ncols(),
        }
    }

    /// Predicts concentrations for feature rows. Output is the raw model
    /// response in ppb and may dip below zero.
    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<Array1<f64>> {
        match &self.inner {
            FittedInner::Plsr { model, log: None } => model.predict(x),
            FittedInner::Plsr { model, log: Some(log) } => {
                let x_log = transforms::apply_log_features(x, log)?;
                let y_log = model.predict(&x_log.view())?;
                Ok(transforms::delog_predictions(&y_log.view(), log))
            }
            FittedInner::Lw(lw) => {
                let config = self.spec.lw_config()?;
                let predictor = LwPredictor::with_standardization(
                    lw.train_x.view(),
                    lw.train_y.view(),
                    config,
                    self.spec.scaling,
                    lw.x_mean.clone(),
                    lw.x_scale.clone(),
                )?;
                let mut out = Array1::zeros(x.nrows());
                for (slot, row) in out.iter_mut().zip(x.rows()) {
                    *slot = predictor.predict(row)?;
                }
                Ok(out)
            }
        }
    }
}

/// Root mean squared error of predictions against truth.
pub fn rmse(pred: &ArrayView1<f64>, truth: &ArrayView1<f64>) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("rmse of zero samples".into()));
    }
    let sum_sq: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sum_sq / pred.len() as f64).sqrt())
}

fn drop_row(x: &ArrayView2<f64>, y: &ArrayView1<f64>, skip: usize) -> (Array2<f64>, Array1<f64>) {
    let n = x.nrows();
    let mut xr = Array2::zeros((n - 1, x.ncols()));
    let mut yr = Array1::zeros(n - 1);
    let mut slot = 0;
    for row in 0..n {
        if row == skip {
            continue;
        }
        xr.row_mut(slot).assign(&x.row(row));
        yr[slot] = y[row];
        slot += 1;
    }
    (xr, yr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvOutcome {
    /// Cross-validated prediction per sample, in input order.
    pub predictions: Array1<f64>,
    pub rmsecv: f64,
}

/// Leave-one-out cross-validation: every sample is predicted by a model
/// refit from scratch on all other rows. No downdating shortcuts.
pub fn loocv(x: &ArrayView2<f64>, y: &ArrayView1<f64>, spec: &ModelSpec) -> Result<LoocvOutcome> {
    let n = x.nrows();
    if n < 3 {
        return Err(Error::EmptyInput(format!(
            "{n} samples; leave-one-out validation needs at least 3"
        )));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }

    let fold_results: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xr, yr) = drop_row(x, y, i);
            let fitted = fit_model(spec, &xr.view(), &yr.view())?;
            let pred = fitted.predict(&x.row(i).insert_axis(ndarray::Axis(0)))?;
            Ok(pred[0])
        })
        .collect();

    let mut predictions = Array1::zeros(n);
    for (i, result) in fold_results.into_iter().enumerate() {
        match result {
            Ok(v) => predictions[i] = v,
            Err(e) => return Err(Error::FoldFailed { index: i, source: Box::new(e) }),
        }
    }
    let rmsecv = rmse(&predictions.view(), y)?;
    Ok(LoocvOutcome { predictions, rmsecv })
}

/// Component-count selection outcome. The curve has one entry per candidate
/// count; counts whose cross-validation failed are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub n_components: usize,
    pub tolerance: f64,
    pub max_components: usize,
    pub rmsecv_curve: Vec<Option<f64>>,
}

/// Selection rule on a dense error curve: the fewest components whose error
/// is within `tolerance` (relative) of the curve minimum. Returns a
/// 1-based component count.
pub fn select_from_curve(curve: &[f64], tolerance: f64) -> Option<usize> {
    let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let threshold = (1.0 + tolerance) * min;
    curve.iter().position(|&v| v <= threshold).map(|idx| idx + 1)
}

/// Sweeps component counts 1..=max, computing RMSECV for each, and applies
/// the fewest-within-tolerance rule.
pub fn select_components(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    template: &ModelSpec,
    max_components: usize,
    tolerance: f64,
) -> Result<Selection> {
    if max_components == 0 {
        return Err(Error::Config("max_components must be at least 1".into()));
    }
    if tolerance < 0.0 || !tolerance.is_finite() {
        return Err(Error::Config(format!(
            "selection tolerance must be a non-negative number, got {tolerance}"
        )));
    }

    let mut curve = Vec::with_capacity(max_components);
    for a in 1..=max_components {
        let spec = template.with_components(a);
        match loocv(x, y, &spec) {
            Ok(outcome) => curve.push(Some(outcome.rmsecv)),
            Err(_) => curve.push(None),
        }
    }

    let min = curve
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NoViableComponents);
    }
    let threshold = (1.0 + tolerance) * min;
    let n_components = curve
        .iter()
        .position(|entry| matches!(entry, Some(v) if *v <= threshold))
        .map(|idx| idx + 1)
        .expect("a finite minimum implies a qualifying entry");

    Ok(Selection { n_components, tolerance, max_components, rmsecv_curve: curve })
}

/// Predictions grouped by exact true concentration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    /// True concentration in ppb.
    pub concentration: f64,
    pub n: usize,
    pub mean_pred: f64,
    /// Sample standard deviation (n-1) of the group's predictions;
    /// zero for singleton groups.
    pub sd_pred: f64,
}

/// Per-concentration statistics of predictions, ordered by concentration.
/// Groups are keyed by exact label equality: concentrations are set-points.
pub fn group_stats(pred: &ArrayView1<f64>, truth: &ArrayView1<f64>) -> Result<Vec<GroupStats>> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("group statistics of zero samples".into()));
    }
    let mut pairs: Vec<(f64, f64)> = truth.iter().copied().zip(pred.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite concentrations"));

    let mut groups = Vec::new();
    let mut start = 0;
    while start < pairs.len() {
        let c = pairs[start].0;
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 == c {
            end += 1;
        }
        let members = &pairs[start..end];
        let n = members.len();
        let mean = members.iter().map(|&(_, p)| p).sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss: f64 = members.iter().map(|&(_, p)| (p - mean) * (p - mean)).sum();
            (ss / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        groups.push(GroupStats { concentration: c, n, mean_pred: mean, sd_pred: sd });
        start = end;
    }
    Ok(groups)
}

/// Root mean squared error of group means against the true concentrations,
/// groups weighted equally. Low values mean a nearly linear calibration.
pub fn rmsem(pred: &ArrayView1<f64>, truth: &ArrayView1<f64>) -> Result<f64> {
    let groups = group_stats(pred, truth)?;
    if groups.len() < 2 {
        return Err(Error::SingleGroup);
    }
    let sum_sq: f64 = groups
        .iter()
        .map(|g| (g.mean_pred - g.concentration) * (g.mean_pred - g.concentration))
        .sum();
    Ok((sum_sq / groups.len() as f64).sqrt())
}

fn max_group_sd(groups: &[GroupStats]) -> Option<f64> {
    groups
        .iter()
        .filter(|g| g.n >= 2)
        .map(|g| g.sd_pred)
        .fold(None, |acc, sd| Some(acc.map_or(sd, |m: f64| m.max(sd))))
}

/// Model uncertainty: four times the largest within-group standard
/// deviation of predictions — the end-to-end span of the widest +-2 sigma
/// error bar. Singleton groups carry no spread and are skipped.
pub fn uncertainty(pred: &ArrayView1<f64>, truth: &ArrayView1<f64>) -> Result<f64> {
    let groups = group_stats(pred, truth)?;
    max_group_sd(&groups).map(|sd| 4.0 * sd).ok_or(Error::NoQualifyingGroup)
}

/// [`uncertainty`] restricted to groups at or below `c_max` ppb.
pub fn uncertainty_in_range(
    pred: &ArrayView1<f64>,
    truth: &ArrayView1<f64>,
    c_max: f64,
) -> Result<f64> {
    let groups: Vec<GroupStats> = group_stats(pred, truth)?
        .into_iter()
        .filter(|g| g.concentration <= c_max)
        .collect();
    if groups.is_empty() {
        return Err(Error::NoQualifyingGroup);
    }
    max_group_sd(&groups).map(|sd| 4.0 * sd).ok_or(Error::NoQualifyingGroup)
}

/// Per-sample prediction triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub cycle_id: i64,
    pub truth: f64,
    pub fitted: f64,
    pub cross_validated: f64,
}

/// Full evaluation of one variant on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub schema_version: u32,
    pub variant: Variant,
    pub n_components: usize,
    pub model_spec: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    /// Fit error on the training data, ppb.
    pub rmse: f64,
    /// Leave-one-out cross-validation error, ppb.
    pub rmsecv: f64,
    /// Linearity measure: error of per-concentration means, ppb.
    pub rmsem: f64,
    /// 4 x the largest within-group prediction spread, ppb.
    pub uncertainty: f64,
    pub groups: Vec<GroupStats>,
    pub predictions: Vec<PredictionRecord>,
    pub warnings: Vec<String>,
}

/// Fits the spec on the full dataset, computes metrics from the fitted
/// values, cross-validates for RMSECV, and assembles the report.
pub fn build_report(
    matrix: &FeatureMatrix,
    spec: &ModelSpec,
    selection: Option<Selection>,
) -> Result<ModelReport> {
    let y = matrix.training_y()?;
    let x = matrix.x.view();

    let fitted_model = fit_model(spec, &x, &y.view())?;
    let fitted = fitted_model.predict(&x)?;
    let rmse_value = rmse(&fitted.view(), &y.view())?;
    let groups = group_stats(&fitted.view(), &y.view())?;
    let rmsem_value = rmsem(&fitted.view(), &y.view())?;
    let uncertainty_value = uncertainty(&fitted.view(), &y.view())?;

    let mut warnings = Vec::new();
    let singletons = groups.iter().filter(|g| g.n == 1).count();
    if singletons > 0 {
        warnings.push(format!(
            "{singletons} singleton concentration group(s) excluded from the uncertainty maximum"
        ));
    }
    if let FittedInner::Plsr { model, .. } = &fitted_model.inner {
        if model.degenerate {
            warnings.push(format!(
                "deflation exhausted after {} of {} requested components",
                model.n_components, model.requested_components
            ));
        }
    }

    let cv = loocv(&x, &y.view(), spec)?;

    let predictions = matrix
        .cycle_ids
        .iter()
        .zip(y.iter())
        .zip(fitted.iter().zip(cv.predictions.iter()))
        .map(|((&cycle_id, &truth), (&fit, &cvp))| PredictionRecord {
            cycle_id,
            truth,
            fitted: fit,
            cross_validated: cvp,
        })
        .collect();

    Ok(ModelReport {
        schema_version: REPORT_SCHEMA_VERSION,
        variant: spec.variant,
        n_components: spec.n_components,
        model_spec: spec.clone(),
        selection,
        rmse: rmse_value,
        rmsecv: cv.rmsecv,
        rmsem: rmsem_value,
        uncertainty: uncertainty_value,
        groups,
        predictions,
        warnings,
    })
}
