//! End-to-end behavior of the feature -> transform -> regression pipeline
//! on synthetic data with a known generating law.

mod common;

use common::{random_matrix, rng};
use gasquant::features::{build_feature_matrix, FeatureConfig};
use gasquant::lw::LwConfig;
use gasquant::plsr::ScalingSpec;
use gasquant::synth::{self, ScheduleEntry, SynthConfig};
use gasquant::validation::{
    build_report, fit_model, loocv, select_components, LwParams, ModelSpec, Variant,
};
use gasquant::{lw, plsr};
use ndarray::{Array1, Array2};

/// Noiseless generator whose response term matches the log pipeline's
/// assumptions exactly: unit sensitivity and exponent on a strictly
/// increasing baseline, so every feature column is positive and
/// proportional to (1 + c).
fn exact_law_config(schedule: Vec<ScheduleEntry>) -> SynthConfig {
    let len = 160;
    SynthConfig {
        schema_version: 1,
        baseline: (0..len).map(|j| 1.0e-5 * (1.0 + j as f64 / len as f64)).collect(),
        sensitivity: vec![1.0; len],
        exponent: vec![1.0; len],
        noise_sigma: 0.0,
        noise_kind: Default::default(),
        drift_rate: 0.0,
        schedule,
        seed: 1,
        sample_rate_hz: 4.0,
    }
}

fn staircase(cycles_per_level: usize) -> Vec<ScheduleEntry> {
    [0.0, 2.5, 5.0, 10.0, 20.0, 40.0]
        .into_iter()
        .map(|c| ScheduleEntry::new(c, cycles_per_level))
        .collect()
}

#[test]
fn log_pipeline_recovers_exact_power_law_concentrations() {
    let config = exact_law_config(staircase(4));
    let cycles = synth::generate(&config).unwrap();
    let matrix = build_feature_matrix(&cycles, &FeatureConfig::default()).unwrap();
    let y = matrix.training_y().unwrap();

    let spec = ModelSpec::new(Variant::LogPlsr, 1);
    let fitted = fit_model(&spec, &matrix.x.view(), &y.view()).unwrap();
    let recovered = fitted.predict(&matrix.x.view()).unwrap();
    for (got, want) in recovered.iter().zip(y.iter()) {
        assert!(
            (got - want).abs() < 1e-6,
            "recovered {got} for true {want} ppb"
        );
    }
}

#[test]
fn single_feature_power_law_is_recovered_through_the_log_route() {
    // Direct scalar response S = a (c + shift)^b: taking logs makes the
    // relation exactly affine, so one component suffices for an exact fit.
    let (a, b, shift) = (0.7f64, 0.45f64, 1.0f64);
    let concentrations = [0.0, 2.5, 5.0, 10.0, 20.0, 40.0];
    let mut y = Vec::new();
    let mut s = Vec::new();
    for _rep in 0..3 {
        for &c in &concentrations {
            y.push(c);
            s.push(a * (c + shift).powf(b));
        }
    }
    let x = Array2::from_shape_vec((y.len(), 1), s).unwrap();
    let y = Array1::from_vec(y);

    let mut spec = ModelSpec::new(Variant::LogPlsr, 1);
    spec.log_shift = shift;
    let fitted = fit_model(&spec, &x.view(), &y.view()).unwrap();
    let recovered = fitted.predict(&x.view()).unwrap();
    for (got, want) in recovered.iter().zip(y.iter()) {
        let tol = 1e-6 * want.abs().max(1.0);
        assert!((got - want).abs() < tol, "recovered {got} for true {want}");
    }
}

#[test]
fn perfect_data_reports_vanishing_metrics() {
    // With a linear response every variant fits exactly; the raw model's
    // report must show all four metrics at numerical zero.
    let config = exact_law_config(staircase(3));
    let cycles = synth::generate(&config).unwrap();
    let matrix = build_feature_matrix(&cycles, &FeatureConfig::default()).unwrap();

    let spec = ModelSpec::new(Variant::RawPlsr, 1);
    let report = build_report(&matrix, &spec, None).unwrap();
    assert!(report.rmse < 1e-6, "rmse {}", report.rmse);
    assert!(report.rmsecv < 1e-6, "rmsecv {}", report.rmsecv);
    assert!(report.rmsem < 1e-6, "rmsem {}", report.rmsem);
    assert!(report.uncertainty < 1e-6, "uncertainty {}", report.uncertainty);
    assert_eq!(report.groups.len(), 6);
    assert_eq!(report.predictions.len(), matrix.n_samples());
}

#[test]
fn campaign_sized_dataset_builds_the_expected_matrix() {
    // 30 cycles at each of five concentrations plus 100 background.
    let mut schedule = vec![ScheduleEntry::new(0.0, 100)];
    schedule.extend([40.0, 20.0, 10.0, 5.0, 2.5].map(|c| ScheduleEntry::new(c, 30)));
    let config = exact_law_config(schedule);
    let cycles = synth::generate(&config).unwrap();
    let matrix = build_feature_matrix(&cycles, &FeatureConfig::default()).unwrap();
    assert_eq!(matrix.x.shape(), &[250, 20]);
}

#[test]
fn report_round_trips_through_json() {
    let config = exact_law_config(staircase(3));
    let cycles = synth::generate(&config).unwrap();
    let matrix = build_feature_matrix(&cycles, &FeatureConfig::default()).unwrap();
    let y = matrix.training_y().unwrap();

    let template = ModelSpec::new(Variant::RawPlsr, 1);
    let selection = select_components(&matrix.x.view(), &y.view(), &template, 3, 0.05).unwrap();
    let spec = template.with_components(selection.n_components);
    let report = build_report(&matrix, &spec, Some(selection)).unwrap();

    let text = serde_json::to_string_pretty(&report).unwrap();
    let back: gasquant::ModelReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report, back);
    assert_eq!(back.selection.as_ref().unwrap().rmsecv_curve.len(), 3);
}

#[test]
fn log_variant_beats_raw_on_curved_response() {
    // A square-root response curves the raw calibration; the log variant
    // straightens it. Noiseless, so the contrast is purely structural.
    let len = 160;
    let config = SynthConfig {
        schema_version: 1,
        baseline: synth::default_baseline(len),
        sensitivity: synth::default_sensitivity(len),
        exponent: vec![0.5; len],
        noise_sigma: 0.0,
        noise_kind: Default::default(),
        drift_rate: 0.0,
        schedule: staircase(3),
        seed: 9,
        sample_rate_hz: 4.0,
    };
    let cycles = synth::generate(&config).unwrap();
    let matrix = build_feature_matrix(&cycles, &FeatureConfig::default()).unwrap();

    let raw = build_report(&matrix, &ModelSpec::new(Variant::RawPlsr, 3), None).unwrap();
    let log = build_report(&matrix, &ModelSpec::new(Variant::LogPlsr, 3), None).unwrap();
    assert!(
        raw.rmsem > log.rmsem,
        "raw rmsem {} should exceed log rmsem {}",
        raw.rmsem,
        log.rmsem
    );
}

#[test]
fn lw_with_full_neighborhood_degenerates_to_global_model() {
    let mut rng = rng(77);
    let n = 40;
    let p = 6;
    let x = random_matrix(&mut rng, n, p);
    let beta = Array1::from_shape_fn(p, |j| (j + 1) as f64);
    let y = x.dot(&beta) + 30.0;

    let global = plsr::fit(&x.view(), &y.view(), 3, ScalingSpec::default()).unwrap();
    let config = LwConfig::new(n, 3);
    let queries = random_matrix(&mut rng, 50, p);
    for row in queries.rows() {
        let local = lw::predict_lw(&x.view(), &y.view(), row, &config, ScalingSpec::default())
            .unwrap();
        let reference = global.predict_one(row).unwrap();
        assert!(
            (local - reference).abs() <= 1e-10 * reference.abs().max(1.0),
            "{local} vs {reference}"
        );
    }
}

#[test]
fn lw_loocv_with_chosen_k_runs_clean() {
    // A small grouped dataset: pick k by the neighborhood rule, then make
    // sure cross-validation completes and stays near the global fit.
    let config = SynthConfig {
        noise_sigma: 0.01,
        ..exact_law_config(staircase(5))
    };
    let cycles = synth::generate(&config).unwrap();
    let matrix = build_feature_matrix(&cycles, &FeatureConfig::default()).unwrap();
    let y = matrix.training_y().unwrap();

    let k = gasquant::choose_k(&matrix.x.view(), &y.view(), &LwConfig::new(2, 1)).unwrap();
    assert!(k >= 2 && k < matrix.n_samples());

    let spec = ModelSpec {
        lw: Some(LwParams::new(k)),
        ..ModelSpec::new(Variant::LwPlsr, 1)
    };
    let outcome = loocv(&matrix.x.view(), &y.view(), &spec).unwrap();
    assert!(outcome.rmsecv < 2.0, "rmsecv {}", outcome.rmsecv);
}
