//! Shared oracles for integration tests. These stay independent of the
//! implementation paths they check: plain normal equations for least
//! squares and a sequential refit-per-fold loop for cross-validation.

// Not every test target uses every helper.
#![allow(dead_code)]

use gasquant::validation::{fit_model, ModelSpec};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(rng))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| StandardNormal.sample(rng))
}

/// Ordinary least squares with intercept, solved by Gauss-Jordan
/// elimination on the normal equations.
pub struct OlsOracle {
    pub coefficients: Array1<f64>,
    pub intercept: f64,
}

impl OlsOracle {
    pub fn fit(x: &Array2<f64>, y: &Array1<f64>) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        // Augmented design [1 | X].
        let mut a = Array2::ones((n, p + 1));
        a.slice_mut(ndarray::s![.., 1..]).assign(x);
        let ata = a.t().dot(&a);
        let aty = a.t().dot(y);

        let dim = p + 1;
        let mut aug = Array2::zeros((dim, dim + 1));
        aug.slice_mut(ndarray::s![.., ..dim]).assign(&ata);
        for i in 0..dim {
            aug[[i, dim]] = aty[i];
        }
        for col in 0..dim {
            let pivot_row = (col..dim)
                .max_by(|&i, &j| aug[[i, col]].abs().partial_cmp(&aug[[j, col]].abs()).unwrap())
                .unwrap();
            assert!(aug[[pivot_row, col]] != 0.0, "singular design in OLS oracle");
            if pivot_row != col {
                for k in 0..=dim {
                    aug.swap([pivot_row, k], [col, k]);
                }
            }
            let pivot = aug[[col, col]];
            for row in 0..dim {
                if row == col {
                    continue;
                }
                let factor = aug[[row, col]] / pivot;
                for k in col..=dim {
                    let v = aug[[col, k]];
                    aug[[row, k]] -= factor * v;
                }
            }
        }
        let beta: Vec<f64> = (0..dim).map(|i| aug[[i, dim]] / aug[[i, i]]).collect();
        Self {
            intercept: beta[0],
            coefficients: Array1::from_vec(beta[1..].to_vec()),
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        x.dot(&self.coefficients) + self.intercept
    }
}

/// Reference leave-one-out loop: sequential, refit from scratch per fold
/// through the same public fitting entry points.
pub fn naive_loocv(x: &Array2<f64>, y: &Array1<f64>, spec: &ModelSpec) -> Array1<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let mut predictions = Array1::zeros(n);
    for i in 0..n {
        let mut xr = Array2::zeros((n - 1, p));
        let mut yr = Array1::zeros(n - 1);
        let mut slot = 0;
        for row in 0..n {
            if row == i {
                continue;
            }
            xr.row_mut(slot).assign(&x.row(row));
            yr[slot] = y[row];
            slot += 1;
        }
        let fitted = fit_model(spec, &xr.view(), &yr.view()).expect("fold fit");
        let pred = fitted
            .predict(&x.row(i).insert_axis(ndarray::Axis(0)))
            .expect("fold prediction");
        predictions[i] = pred[0];
    }
    predictions
}

/// Relative agreement check with a unit floor for near-zero references.
pub fn assert_close_rel(actual: f64, reference: f64, tol: f64, context: &str) {
    let scale = reference.abs().max(actual.abs()).max(1.0);
    assert!(
        (actual - reference).abs() <= tol * scale,
        "{context}: {actual} vs {reference} (tol {tol})"
    );
}
