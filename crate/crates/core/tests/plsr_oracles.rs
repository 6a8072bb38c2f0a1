//! PLSR behavior against independent least-squares oracles.

mod common;

use common::{assert_close_rel, naive_loocv, random_matrix, random_vector, rng, OlsOracle};
use gasquant::plsr::{self, ScalingSpec};
use gasquant::validation::{self, LwParams, ModelSpec, Variant};
use ndarray::{Array1, Array2};

fn regression_problem(seed: u64, n: usize, p: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = rng(seed);
    let x = random_matrix(&mut rng, n, p);
    let beta = random_vector(&mut rng, p);
    let noise = random_vector(&mut rng, n) * 0.1;
    let y = x.dot(&beta) + noise + 5.0;
    (x, y)
}

#[test]
fn full_component_fit_matches_ols_oracle() {
    let (x, y) = regression_problem(42, 60, 8);
    let model = plsr::fit(&x.view(), &y.view(), 8, ScalingSpec::default()).unwrap();
    let oracle = OlsOracle::fit(&x, &y);

    let fitted = model.predict(&x.view()).unwrap();
    let reference = oracle.predict(&x);
    for (i, (a, b)) in fitted.iter().zip(reference.iter()).enumerate() {
        assert_close_rel(*a, *b, 1e-8, &format!("training row {i}"));
    }

    // Held-out rows from the same distribution.
    let mut holdout_rng = rng(43);
    let queries = random_matrix(&mut holdout_rng, 25, 8);
    let fitted = model.predict(&queries.view()).unwrap();
    let reference = oracle.predict(&queries);
    for (i, (a, b)) in fitted.iter().zip(reference.iter()).enumerate() {
        assert_close_rel(*a, *b, 1e-8, &format!("held-out row {i}"));
    }
}

#[test]
fn single_component_ignores_orthogonal_noise_features() {
    // y depends only on feature 1; features 2..p are zero-mean noise
    // directions orthogonal to feature 1 and to each other, scaled tiny.
    let n = 24;
    let p = 6;
    let mut rng = rng(7);
    let x1 = Array1::from_shape_fn(n, |i| i as f64 + 1.0);
    let x1_centered = &x1 - x1.sum() / n as f64;

    let mut basis: Vec<Array1<f64>> = vec![Array1::ones(n), x1_centered.clone()];
    let mut columns: Vec<Array1<f64>> = vec![x1.clone()];
    for _ in 1..p {
        let mut candidate = random_vector(&mut rng, n);
        for b in &basis {
            let proj = candidate.dot(b) / b.dot(b);
            candidate = candidate - b * proj;
        }
        let norm = candidate.dot(&candidate).sqrt();
        let column = &candidate / norm * 1e-6;
        basis.push(column.clone());
        columns.push(column);
    }
    let mut x = Array2::zeros((n, p));
    for (j, column) in columns.iter().enumerate() {
        x.column_mut(j).assign(column);
    }
    let y = &x1 * 3.0;

    let model = plsr::fit(&x.view(), &y.view(), 1, ScalingSpec::default()).unwrap();
    let b1 = model.coefficients[0].abs();
    let rest: f64 = model.coefficients.iter().skip(1).map(|b| b * b).sum::<f64>().sqrt();
    assert!(rest < 0.05 * b1, "rest {rest} vs b1 {b1}");

    // The construction is exactly linear, so the oracle agrees too.
    let oracle = OlsOracle::fit(&x, &y);
    let fitted = model.predict(&x.view()).unwrap();
    let reference = oracle.predict(&x);
    for (a, b) in fitted.iter().zip(reference.iter()) {
        assert_close_rel(*a, *b, 1e-8, "orthogonal design");
    }
}

#[test]
fn autoscaling_makes_fits_invariant_to_column_rescaling() {
    let (x, y) = regression_problem(11, 30, 5);
    let mut x_scaled = x.clone();
    x_scaled.column_mut(2).mapv_inplace(|v| v * 1000.0);

    let a = plsr::fit(&x.view(), &y.view(), 3, ScalingSpec::default()).unwrap();
    let b = plsr::fit(&x_scaled.view(), &y.view(), 3, ScalingSpec::default()).unwrap();

    let mut query_rng = rng(12);
    let queries = random_matrix(&mut query_rng, 10, 5);
    let mut queries_scaled = queries.clone();
    queries_scaled.column_mut(2).mapv_inplace(|v| v * 1000.0);

    let pa = a.predict(&queries.view()).unwrap();
    let pb = b.predict(&queries_scaled.view()).unwrap();
    for (ai, bi) in pa.iter().zip(pb.iter()) {
        assert!((ai - bi).abs() < 1e-9, "{ai} vs {bi}");
    }
}

#[test]
fn training_rmse_never_increases_with_components() {
    let (x, y) = regression_problem(21, 40, 6);
    let mut previous = f64::INFINITY;
    for a in 1..=6 {
        let model = plsr::fit(&x.view(), &y.view(), a, ScalingSpec::default()).unwrap();
        let fitted = model.predict(&x.view()).unwrap();
        let rmse = validation::rmse(&fitted.view(), &y.view()).unwrap();
        assert!(
            rmse <= previous + 1e-12,
            "rmse increased from {previous} to {rmse} at {a} components"
        );
        previous = rmse;
    }
}

#[test]
fn training_scores_are_mutually_orthogonal() {
    for (seed, n, p, a) in [(1u64, 30, 6, 6), (2, 50, 10, 7), (3, 25, 4, 3)] {
        let (x, y) = regression_problem(seed, n, p);
        let model = plsr::fit(&x.view(), &y.view(), a, ScalingSpec::default()).unwrap();
        let scores = model.scores(&x.view()).unwrap();
        for i in 0..model.n_components {
            for j in 0..i {
                let ti = scores.column(i);
                let tj = scores.column(j);
                let dot = ti.dot(&tj).abs();
                let bound = 1e-8 * ti.dot(&ti).sqrt() * tj.dot(&tj).sqrt();
                assert!(dot <= bound, "seed {seed}: |t{i}.t{j}| = {dot} > {bound}");
            }
        }
    }
}

#[test]
fn fitting_is_bit_deterministic() {
    let (x, y) = regression_problem(33, 45, 7);
    let a = plsr::fit(&x.view(), &y.view(), 5, ScalingSpec::default()).unwrap();
    let b = plsr::fit(&x.view(), &y.view(), 5, ScalingSpec::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn loocv_equals_naive_refit_oracle_bit_exactly() {
    let (x, mut y) = regression_problem(55, 18, 4);
    // Non-negative staggered responses keep the log variant's shift valid.
    for (i, v) in y.iter_mut().enumerate() {
        *v = [0.0, 5.0, 20.0][i % 3] + (i as f64) * 1e-3;
    }

    let specs = [
        ModelSpec::new(Variant::RawPlsr, 2),
        ModelSpec::new(Variant::LogPlsr, 2),
        ModelSpec {
            lw: Some(LwParams::new(8)),
            ..ModelSpec::new(Variant::LwPlsr, 2)
        },
    ];
    for spec in &specs {
        // Log features need positive columns; shift the design for that variant.
        let x_used = match spec.variant {
            Variant::LogPlsr => x.mapv(|v| v + 10.0),
            _ => x.clone(),
        };
        let ours = validation::loocv(&x_used.view(), &y.view(), spec).unwrap();
        let reference = naive_loocv(&x_used, &y, spec);
        for (i, (a, b)) in ours.predictions.iter().zip(reference.iter()).enumerate() {
            assert_eq!(a.to_bits(), b.to_bits(), "{} fold {i}: {a} vs {b}", spec.variant);
        }
    }
}
