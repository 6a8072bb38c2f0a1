//! Double-logarithmic pre-treatment for the linearized calibration variant.
//!
//! Gas response is close to a power law in concentration, so regressing
//! log-features against log-shifted concentrations linearizes the problem.
//! Feature columns that contain non-positive values bypass the log and pass
//! through unchanged; the per-column mask is learned from training data and
//! persisted with the model. Concentrations are shifted before the log so
//! that 0 ppb stays representable, and predictions are delogarithmized by
//! the exact inverse.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log pre-treatment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogTransformSpec {
    /// Added to concentrations before the log; subtracted after the inverse.
    pub shift: f64,
    /// True for each feature column that is log-transformed.
    pub feature_log_mask: Vec<bool>,
}

/// Learns the column mask: exactly the columns whose training values are all
/// strictly positive are marked for the natural log.
pub fn fit_log_spec(x: &ArrayView2<f64>, shift: f64) -> Result<LogTransformSpec> {
    if shift <= 0.0 || !shift.is_finite() {
        return Err(Error::Config(format!("log shift must be a positive number, got {shift}")));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("cannot fit a log mask on an empty matrix".into()));
    }
    let mask = (0..x.ncols())
        .map(|j| x.column(j).iter().all(|&v| v > 0.0))
        .collect();
    Ok(LogTransformSpec { shift, feature_log_mask: mask })
}

/// Applies the mask to feature rows: masked columns become their natural
/// log, the rest pass through. A non-positive value in a masked column is an
/// error that names the offending row and column.
pub fn apply_log_features(x: &ArrayView2<f64>, spec: &LogTransformSpec) -> Result<Array2<f64>> {
    if x.ncols() != spec.feature_log_mask.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.feature_log_mask.len(),
            got: x.ncols(),
        });
    }
    let mut out = x.to_owned();
    for (j, &logged) in spec.feature_log_mask.iter().enumerate() {
        if !logged {
            continue;
        }
        for (i, v) in out.column_mut(j).iter_mut().enumerate() {
            if *v <= 0.0 || !v.is_finite() {
                return Err(Error::NonPositiveForLog { row: i, column: j, value: *v });
            }
            *v = v.ln();
        }
    }
    Ok(out)
}

/// Transforms features and concentrations together:
/// masked columns -> ln, y -> ln(y + shift).
pub fn apply_log(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    spec: &LogTransformSpec,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let x_log = apply_log_features(x, spec)?;
    let mut y_log = Array1::zeros(y.len());
    for (out, &v) in y_log.iter_mut().zip(y.iter()) {
        let shifted = v + spec.shift;
        if shifted <= 0.0 || !shifted.is_finite() {
            return Err(Error::Numerical(format!(
                "concentration {v} plus shift {} is not positive",
                spec.shift
            )));
        }
        *out = shifted.ln();
    }
    Ok((x_log, y_log))
}

/// Inverse of the concentration transform: `exp(v) - shift`.
///
/// No clamping is applied; a model may legitimately predict below 0 ppb and
/// the metrics must see that.
pub fn delog_predictions(y_log_hat: &ArrayView1<f64>, spec: &LogTransformSpec) -> Array1<f64> {
    y_log_hat.mapv(|v| v.exp() - spec.shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};

    #[test]
    fn mask_marks_only_all_positive_columns() {
        // Means-like columns positive, one slope-like column mixed-sign.
        let x = array![[1.0, 10.0, -0.5], [2.0, 20.0, 0.5], [3.0, 30.0, -0.1]];
        let spec = fit_log_spec(&x.view(), 1.0).unwrap();
        assert_eq!(spec.feature_log_mask, vec![true, true, false]);
    }

    #[test]
    fn powers_of_ten_column_is_masked() {
        let x = array![[1.0], [10.0], [100.0]];
        let spec = fit_log_spec(&x.view(), 1.0).unwrap();
        assert_eq!(spec.feature_log_mask, vec![true]);
    }

    #[test]
    fn zero_in_column_disables_mask() {
        let x = array![[1.0], [0.0], [100.0]];
        let spec = fit_log_spec(&x.view(), 1.0).unwrap();
        assert_eq!(spec.feature_log_mask, vec![false]);
    }

    #[test]
    fn all_negative_matrix_yields_all_false_mask() {
        let x = array![[-1.0, -2.0], [-3.0, -4.0]];
        let spec = fit_log_spec(&x.view(), 1.0).unwrap();
        assert_eq!(spec.feature_log_mask, vec![false, false]);
    }

    #[test]
    fn zero_concentration_maps_to_zero() {
        let spec = LogTransformSpec { shift: 1.0, feature_log_mask: vec![] };
        let x = Array2::zeros((1, 0));
        let (_, y_log) = apply_log(&x.view(), &array![0.0].view(), &spec).unwrap();
        assert_eq!(y_log[0], 0.0);
    }

    #[test]
    fn concentration_set_shifts_into_expected_logs() {
        let spec = LogTransformSpec { shift: 1.0, feature_log_mask: vec![] };
        let y = array![2.5, 5.0, 10.0, 20.0, 40.0];
        let x = Array2::zeros((5, 0));
        let (_, y_log) = apply_log(&x.view(), &y.view(), &spec).unwrap();
        let expected = [3.5f64, 6.0, 11.0, 21.0, 41.0];
        for (v, e) in y_log.iter().zip(expected) {
            assert!((v - e.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn masked_column_takes_natural_log() {
        let e = std::f64::consts::E;
        let x = array![[e], [e * e]];
        let spec = LogTransformSpec { shift: 1.0, feature_log_mask: vec![true] };
        let out = apply_log_features(&x.view(), &spec).unwrap();
        assert!((out[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((out[[1, 0]] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn non_positive_in_masked_column_identifies_row_and_column() {
        let x = array![[1.0, 2.0], [3.0, -4.0]];
        let spec = LogTransformSpec { shift: 1.0, feature_log_mask: vec![true, true] };
        let err = apply_log_features(&x.view(), &spec).unwrap_err();
        match err {
            Error::NonPositiveForLog { row, column, value } => {
                assert_eq!((row, column), (1, 1));
                assert_eq!(value, -4.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn delog_is_exact_inverse() {
        let spec = LogTransformSpec { shift: 1.0, feature_log_mask: vec![] };
        let zero = delog_predictions(&array![0.0].view(), &spec);
        assert_eq!(zero[0], 0.0);

        let x = Array2::zeros((1, 0));
        let (_, y_log) = apply_log(&x.view(), &array![17.0].view(), &spec).unwrap();
        let back = delog_predictions(&y_log.view(), &spec);
        assert!((back[0] - 17.0).abs() < 1e-12 * 17.0);

        let top = delog_predictions(&array![41.0f64.ln()].view(), &spec);
        assert!((top[0] - 40.0).abs() < 1e-12);
    }

    #[test]
    fn delog_is_strictly_increasing() {
        let spec = LogTransformSpec { shift: 1.0, feature_log_mask: vec![] };
        let inputs = array![-2.0, -1.0, 0.0, 0.5, 1.0, 3.0];
        let out = delog_predictions(&inputs.view(), &spec);
        for pair in out.axis_windows(Axis(0), 2) {
            assert!(pair[1] > pair[0]);
        }
    }
}
