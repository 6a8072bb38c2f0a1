//! Univariate partial least squares regression (PLS1, NIPALS deflation).
//!
//! The fit works on centered/autoscaled data and folds the latent-variable
//! solution back into plain regression coefficients, so prediction is a dot
//! product in the original feature units.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Preprocessing switches applied inside `fit` and baked into the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub center_x: bool,
    /// Scale feature columns to unit variance. Means (siemens) and slopes
    /// (siemens/second) are incommensurate, so this defaults to on.
    pub scale_x: bool,
    pub center_y: bool,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self { center_x: true, scale_x: true, center_y: true }
    }
}

/// Fitted PLS1 model.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsrModel {
    /// Number of components actually extracted.
    pub n_components: usize,
    /// Number of components asked for; differs from `n_components` only
    /// when deflation ran out of covariance early.
    pub requested_components: usize,
    /// Set when the fit stopped early on a numerically exhausted deflation.
    pub degenerate: bool,
    pub scaling: ScalingSpec,
    pub x_mean: Array1<f64>,
    pub x_scale: Array1<f64>,
    pub y_mean: f64,
    /// Weight vectors, one unit-norm column per component (p x A).
    pub weights: Array2<f64>,
    /// X-loadings (p x A).
    pub x_loadings: Array2<f64>,
    /// Y-loadings (A).
    pub y_loadings: Array1<f64>,
    /// Regression coefficients in original feature units (p).
    pub coefficients: Array1<f64>,
    pub intercept: f64,
}

/// Zero-variance guard: a column whose spread is this small relative to its
/// magnitude is treated as constant and gets scale factor 1.
const SCALE_FLOOR_REL: f64 = 1e-12;

/// Deflation is considered exhausted when the covariance norm falls below
/// this fraction of its first-iteration value.
const DEFLATION_FLOOR_REL: f64 = 1e-12;

/// Per-column mean and standard deviation with the constant-column guard.
///
/// `center = false` yields zero means; `scale = false` yields unit scales,
/// so downstream formulas hold for every flag combination.
pub(crate) fn column_mean_scale(x: &ArrayView2<f64>, center: bool, scale: bool) -> (Array1<f64>, Array1<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let mut means = Array1::zeros(p);
    let mut scales = Array1::ones(p);
    for j in 0..p {
        let col = x.column(j);
        let mean = if n > 0 { col.sum() / n as f64 } else { 0.0 };
        if center {
            means[j] = mean;
        }
        if scale && n > 1 {
            let mut ss = 0.0;
            let mut max_abs: f64 = 0.0;
            for &v in col {
                ss += (v - mean) * (v - mean);
                max_abs = max_abs.max(v.abs());
            }
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            scales[j] = if sd <= SCALE_FLOOR_REL * max_abs { 1.0 } else { sd };
        }
    }
    (means, scales)
}

fn standardize(x: &ArrayView2<f64>, means: &Array1<f64>, scales: &Array1<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        row -= means;
        row /= scales;
    }
    out
}

struct NipalsOutcome {
    weights: Array2<f64>,
    x_loadings: Array2<f64>,
    y_loadings: Array1<f64>,
    achieved: usize,
    degenerate: bool,
}

/// NIPALS PLS1 on preprocessed data: per component, the weight is the
/// normalized covariance direction, the score is its projection, and both
/// blocks are deflated by the score's rank-one fit.
fn nipals(mut x: Array2<f64>, mut y: Array1<f64>, n_components: usize) -> NipalsOutcome {
    let p = x.ncols();
    let mut weights = Array2::zeros((p, n_components));
    let mut x_loadings = Array2::zeros((p, n_components));
    let mut y_loadings = Array1::zeros(n_components);
    let mut achieved = 0;
    let mut degenerate = false;
    let mut first_cov_norm = None;

    for a in 0..n_components {
        let cov = x.t().dot(&y);
        let cov_norm = cov.dot(&cov).sqrt();
        let floor = match first_cov_norm {
            None => 0.0,
            Some(first) => DEFLATION_FLOOR_REL * first,
        };
        if cov_norm <= floor || cov_norm == 0.0 {
            degenerate = true;
            break;
        }
        if first_cov_norm.is_none() {
            first_cov_norm = Some(cov_norm);
        }

        let w = &cov / cov_norm;
        let t = x.dot(&w);
        let tt = t.dot(&t);
        if tt <= 0.0 || !tt.is_finite() {
            degenerate = true;
            break;
        }
        let p_a = x.t().dot(&t) / tt;
        let q_a = y.dot(&t) / tt;

        // Deflate both blocks.
        for (mut row, &ti) in x.rows_mut().into_iter().zip(t.iter()) {
            row.scaled_add(-ti, &p_a);
        }
        y.scaled_add(-q_a, &t);

        weights.column_mut(a).assign(&w);
        x_loadings.column_mut(a).assign(&p_a);
        y_loadings[a] = q_a;
        achieved = a + 1;
    }

    weights.slice_axis_inplace(Axis(1), (0..achieved).into());
    x_loadings.slice_axis_inplace(Axis(1), (0..achieved).into());
    y_loadings.slice_axis_inplace(Axis(0), (0..achieved).into());
    NipalsOutcome { weights, x_loadings, y_loadings, achieved, degenerate }
}

/// Solves `a z = rhs` for a small square system by Gaussian elimination
/// with partial pivoting.
fn solve_small(a: &Array2<f64>, rhs: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(rhs.nrows(), n);
    let m = rhs.ncols();
    let mut aug = Array2::zeros((n, n + m));
    aug.slice_mut(ndarray::s![.., ..n]).assign(a);
    aug.slice_mut(ndarray::s![.., n..]).assign(rhs);

    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| {
            aug[[i, col]].abs().partial_cmp(&aug[[j, col]].abs()).unwrap()
        })?;
        if aug[[pivot_row, col]] == 0.0 {
            return None;
        }
        if pivot_row != col {
            for k in 0..n + m {
                aug.swap([pivot_row, k], [col, k]);
            }
        }
        let pivot = aug[[col, col]];
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = aug[[row, col]] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n + m {
                let v = aug[[col, k]];
                aug[[row, k]] -= factor * v;
            }
        }
    }
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        let pivot = aug[[i, i]];
        for k in 0..m {
            out[[i, k]] = aug[[i, n + k]] / pivot;
        }
    }
    Some(out)
}

fn check_fit_inputs(x: &ArrayView2<f64>, y: &ArrayView1<f64>, n_components: usize) -> Result<()> {
    let n = x.nrows();
    let p = x.ncols();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(Error::EmptyInput(format!("{n} samples; fitting needs at least 2")));
    }
    if p == 0 {
        return Err(Error::EmptyInput("feature matrix has no columns".into()));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in fit input".into()));
    }
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        return Err(Error::ConstantResponse);
    }
    let max = n.saturating_sub(1).min(p);
    if n_components == 0 || n_components > max {
        return Err(Error::TooManyComponents {
            requested: n_components,
            max,
            n_samples: n,
            n_features: p,
        });
    }
    Ok(())
}

fn assemble_model(
    outcome: NipalsOutcome,
    requested: usize,
    scaling: ScalingSpec,
    x_mean: Array1<f64>,
    x_scale: Array1<f64>,
    y_mean: f64,
) -> Result<PlsrModel> {
    let p = x_mean.len();
    let a = outcome.achieved;
    let (coef_scaled, intercept) = if a == 0 {
        (Array1::zeros(p), y_mean)
    } else {
        let ptw = outcome.x_loadings.t().dot(&outcome.weights);
        let q = outcome
            .y_loadings
            .view()
            .into_shape_with_order((a, 1))
            .expect("column vector");
        let z = solve_small(&ptw, &q.to_owned())
            .ok_or_else(|| Error::Numerical("singular loading/weight system".into()))?;
        let coef_scaled = outcome.weights.dot(&z.column(0).to_owned());
        (coef_scaled, 0.0)
    };
    let coefficients = &coef_scaled / &x_scale;
    let intercept = if a == 0 { intercept } else { y_mean - coefficients.dot(&x_mean) };
    Ok(PlsrModel {
        n_components: a,
        requested_components: requested,
        degenerate: outcome.degenerate,
        scaling,
        x_mean,
        x_scale,
        y_mean,
        weights: outcome.weights,
        x_loadings: outcome.x_loadings,
        y_loadings: outcome.y_loadings,
        coefficients,
        intercept,
    })
}

/// Fits a PLS1 model.
///
/// A numerically exhausted deflation stops early and returns the components
/// extracted so far with `degenerate` set, so component sweeps never abort.
pub fn fit(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    n_components: usize,
    scaling: ScalingSpec,
) -> Result<PlsrModel> {
    check_fit_inputs(x, y, n_components)?;
    let (x_mean, x_scale) = column_mean_scale(x, scaling.center_x, scaling.scale_x);
    let y_mean = if scaling.center_y { y.sum() / y.len() as f64 } else { 0.0 };
    let xc = standardize(x, &x_mean, &x_scale);
    let yc = y.to_owned() - y_mean;
    let outcome = nipals(xc, yc, n_components);
    assemble_model(outcome, n_components, scaling, x_mean, x_scale, y_mean)
}

/// Weighted fit: rows are weighted through weighted centering/scaling and a
/// square-root row reweighting before the NIPALS pass.
pub fn fit_weighted(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    n_components: usize,
    scaling: ScalingSpec,
    row_weights: &ArrayView1<f64>,
) -> Result<PlsrModel> {
    check_fit_inputs(x, y, n_components)?;
    if row_weights.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: row_weights.len() });
    }
    if row_weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::Numerical("row weights must be finite and non-negative".into()));
    }
    let w_sum = row_weights.sum();
    if w_sum <= 0.0 {
        return Err(Error::Numerical("row weights sum to zero".into()));
    }

    let p = x.ncols();
    let mut x_mean = Array1::zeros(p);
    let mut x_scale = Array1::ones(p);
    for j in 0..p {
        let col = x.column(j);
        let mean = col.dot(row_weights) / w_sum;
        if scaling.center_x {
            x_mean[j] = mean;
        }
        if scaling.scale_x {
            let mut ss = 0.0;
            let mut max_abs: f64 = 0.0;
            for (&v, &w) in col.iter().zip(row_weights) {
                ss += w * (v - mean) * (v - mean);
                max_abs = max_abs.max(v.abs());
            }
            let sd = (ss / w_sum).sqrt();
            x_scale[j] = if sd <= SCALE_FLOOR_REL * max_abs { 1.0 } else { sd };
        }
    }
    let y_mean = if scaling.center_y { y.dot(row_weights) / w_sum } else { 0.0 };

    let mut xc = standardize(x, &x_mean, &x_scale);
    let mut yc = y.to_owned() - y_mean;
    for ((mut row, yi), &w) in xc.rows_mut().into_iter().zip(yc.iter_mut()).zip(row_weights) {
        let s = w.sqrt();
        row *= s;
        *yi *= s;
    }
    let outcome = nipals(xc, yc, n_components);
    assemble_model(outcome, n_components, scaling, x_mean, x_scale, y_mean)
}

impl PlsrModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    /// Predicted concentration for one feature vector. Output is the raw
    /// affine response and may be negative.
    pub fn predict_one(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite value in prediction input".into()));
        }
        Ok(self.intercept + self.coefficients.dot(&x))
    }

    /// Row-wise prediction.
    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.ncols() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite value in prediction input".into()));
        }
        Ok(x.dot(&self.coefficients) + self.intercept)
    }

    /// Score matrix `T` for the given rows via the rotation
    /// `R = W (P^T W)^-1`. On the training set the columns of `T` are the
    /// mutually orthogonal NIPALS scores.
    pub fn scores(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.ncols() });
        }
        let a = self.n_components;
        if a == 0 {
            return Ok(Array2::zeros((x.nrows(), 0)));
        }
        let ptw = self.x_loadings.t().dot(&self.weights);
        let eye = Array2::eye(a);
        let inv = solve_small(&ptw, &eye)
            .ok_or_else(|| Error::Numerical("singular loading/weight system".into()))?;
        let rotation = self.weights.dot(&inv);
        let xc = standardize(x, &self.x_mean, &self.x_scale);
        Ok(xc.dot(&rotation))
    }
}
