//! Locally weighted PLSR: a fresh local model per query, fit on the k
//! nearest training points in standardized feature space.
//!
//! Any training row whose features exactly equal the query is excluded
//! before neighbor selection, so predicting a point that is also in the
//! training set behaves like leave-one-out.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plsr::{self, PlsrModel, ScalingSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// All selected neighbors contribute equally.
    #[default]
    Uniform,
    /// Tricube taper in relative distance, clamped away from zero so the
    /// farthest neighbor still enters the fit.
    Tricube,
}

/// Neighborhood configuration for local models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LwConfig {
    /// Number of training points per local model.
    pub k: usize,
    /// Components of each local fit.
    pub n_components: usize,
    pub distance: DistanceMetric,
    pub weighting: Weighting,
}

impl LwConfig {
    pub fn new(k: usize, n_components: usize) -> Self {
        Self {
            k,
            n_components,
            distance: DistanceMetric::default(),
            weighting: Weighting::default(),
        }
    }
}

const TRICUBE_WEIGHT_FLOOR: f64 = 1e-9;

/// Reusable query context: the training set plus the standardization used
/// for distances. The mean/scale pair may come from a persisted model so
/// round-tripped documents reproduce distances exactly.
pub struct LwPredictor<'a> {
    train_x: ArrayView2<'a, f64>,
    train_y: ArrayView1<'a, f64>,
    pub x_mean: Array1<f64>,
    pub x_scale: Array1<f64>,
    config: LwConfig,
    fit_scaling: ScalingSpec,
}

impl<'a> LwPredictor<'a> {
    /// Builds a context, standardizing distances by the training set's own
    /// column mean and spread.
    pub fn new(
        train_x: ArrayView2<'a, f64>,
        train_y: ArrayView1<'a, f64>,
        config: LwConfig,
        fit_scaling: ScalingSpec,
    ) -> Result<Self> {
        let (x_mean, x_scale) = plsr::column_mean_scale(&train_x, true, true);
        Self::with_standardization(train_x, train_y, config, fit_scaling, x_mean, x_scale)
    }

    /// Builds a context with an explicit distance standardization.
    pub fn with_standardization(
        train_x: ArrayView2<'a, f64>,
        train_y: ArrayView1<'a, f64>,
        config: LwConfig,
        fit_scaling: ScalingSpec,
        x_mean: Array1<f64>,
        x_scale: Array1<f64>,
    ) -> Result<Self> {
        let n = train_x.nrows();
        if n != train_y.len() {
            return Err(Error::DimensionMismatch { expected: n, got: train_y.len() });
        }
        if n < 2 {
            return Err(Error::EmptyInput(format!(
                "{n} training rows; local models need at least 2"
            )));
        }
        if x_mean.len() != train_x.ncols() || x_scale.len() != train_x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: train_x.ncols(),
                got: x_mean.len(),
            });
        }
        if config.k < 2 || config.k > n {
            return Err(Error::NeighborhoodSize { k: config.k, min: 2, max: n });
        }
        Ok(Self { train_x, train_y, x_mean, x_scale, config, fit_scaling })
    }

    fn distance(&self, row: ArrayView1<f64>, query: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        for ((&a, &b), (&m, &s)) in row
            .iter()
            .zip(query.iter())
            .zip(self.x_mean.iter().zip(self.x_scale.iter()))
        {
            let d = (a - m) / s - (b - m) / s;
            match self.config.distance {
                DistanceMetric::Euclidean => acc += d * d,
                DistanceMetric::Manhattan => acc += d.abs(),
            }
        }
        match self.config.distance {
            DistanceMetric::Euclidean => acc.sqrt(),
            DistanceMetric::Manhattan => acc,
        }
    }

    /// Predicts one query point from its k-nearest local model.
    pub fn predict(&self, query: ArrayView1<f64>) -> Result<f64> {
        let p = self.train_x.ncols();
        if query.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: query.len() });
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite value in query".into()));
        }

        // Candidate pool: rows not feature-identical to the query, ordered
        // by distance with ties broken toward the lower row index.
        let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(self.train_x.nrows());
        for (idx, row) in self.train_x.rows().into_iter().enumerate() {
            if row == query {
                continue;
            }
            candidates.push((self.distance(row, query), idx));
        }
        let k = self.config.k;
        if candidates.len() < k {
            return Err(Error::NeighborhoodSize { k, min: 2, max: candidates.len() });
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let selected = &candidates[..k];

        let first_y = self.train_y[selected[0].1];
        if selected.iter().all(|&(_, idx)| self.train_y[idx] == first_y) {
            return Err(Error::ConstantNeighborhood { k });
        }

        let mut local_x = Array2::zeros((k, p));
        let mut local_y = Array1::zeros(k);
        for (slot, &(_, idx)) in selected.iter().enumerate() {
            local_x.row_mut(slot).assign(&self.train_x.row(idx));
            local_y[slot] = self.train_y[idx];
        }

        let model = self.fit_local(&local_x, &local_y, selected)?;
        model.predict_one(query)
    }

    fn fit_local(
        &self,
        local_x: &Array2<f64>,
        local_y: &Array1<f64>,
        selected: &[(f64, usize)],
    ) -> Result<PlsrModel> {
        match self.config.weighting {
            Weighting::Uniform => plsr::fit(
                &local_x.view(),
                &local_y.view(),
                self.config.n_components,
                self.fit_scaling,
            ),
            Weighting::Tricube => {
                let d_max = selected.last().expect("k >= 2").0;
                let weights: Array1<f64> = selected
                    .iter()
                    .map(|&(d, _)| {
                        if d_max == 0.0 {
                            1.0
                        } else {
                            let u = (d / d_max).min(1.0);
                            (1.0 - u.powi(3)).powi(3).max(TRICUBE_WEIGHT_FLOOR)
                        }
                    })
                    .collect();
                plsr::fit_weighted(
                    &local_x.view(),
                    &local_y.view(),
                    self.config.n_components,
                    self.fit_scaling,
                    &weights.view(),
                )
            }
        }
    }
}

/// One-shot form of [`LwPredictor::predict`].
pub fn predict_lw(
    train_x: &ArrayView2<f64>,
    train_y: &ArrayView1<f64>,
    query: ArrayView1<f64>,
    config: &LwConfig,
    fit_scaling: ScalingSpec,
) -> Result<f64> {
    LwPredictor::new(*train_x, *train_y, *config, fit_scaling)?.predict(query)
}

/// Smallest k (at least 2) such that for every training point the k nearest
/// other points span at least two distinct concentrations. This guarantees
/// that every local model built while cross-validating the training set has
/// a non-constant response.
pub fn choose_k(
    train_x: &ArrayView2<f64>,
    train_y: &ArrayView1<f64>,
    config: &LwConfig,
) -> Result<usize> {
    let n = train_x.nrows();
    if n != train_y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: train_y.len() });
    }
    if n < 2 {
        return Err(Error::KRuleUnsatisfiable(format!("{n} training rows")));
    }
    let first = train_y[0];
    if train_y.iter().all(|&v| v == first) {
        return Err(Error::KRuleUnsatisfiable(
            "all training points share one concentration".into(),
        ));
    }

    let (x_mean, x_scale) = plsr::column_mean_scale(train_x, true, true);
    let probe = LwPredictor {
        train_x: *train_x,
        train_y: *train_y,
        x_mean,
        x_scale,
        config: *config,
        fit_scaling: ScalingSpec::default(),
    };

    let mut required = 2usize;
    for (i, query) in train_x.rows().into_iter().enumerate() {
        let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for (j, row) in train_x.rows().into_iter().enumerate() {
            if row == query {
                continue;
            }
            candidates.push((probe.distance(row, query), j));
        }
        if candidates.is_empty() {
            return Err(Error::KRuleUnsatisfiable(format!(
                "point {i} has no admissible neighbors"
            )));
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let first_y = train_y[candidates[0].1];
        // Neighborhoods of size <= prefix are constant; the rule needs one more.
        match candidates.iter().position(|&(_, j)| train_y[j] != first_y) {
            Some(pos) => required = required.max(pos + 1),
            None => {
                return Err(Error::KRuleUnsatisfiable(format!(
                    "every admissible neighbor of point {i} shares one concentration"
                )));
            }
        }
    }
    Ok(required)
}
