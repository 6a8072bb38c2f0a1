//! Trace-gas quantification from temperature-cycled sensor conductance.
//!
//! A temperature-cycled metal oxide sensor produces one multivariate
//! conductance signature per heater cycle. This crate turns those cycles
//! into calibrated concentration estimates:
//!
//! 1. [`features`] compresses each cycle into segment mean/slope features.
//! 2. [`plsr`] fits univariate partial least squares regression models.
//! 3. [`transforms`] provides the double-logarithmic pre-treatment that
//!    linearizes the sensor's power-law response.
//! 4. [`lw`] builds a fresh local model per query from the k nearest
//!    training points.
//! 5. [`validation`] selects component counts by leave-one-out
//!    cross-validation and scores models with RMSE, RMSECV, RMSEM, and
//!    the error-bar uncertainty.
//! 6. [`synth`] generates deterministic synthetic datasets with a known
//!    power-law response for end-to-end verification.
//!
//! [`csv_io`] and [`model_doc`] define the on-disk formats shared with the
//! command-line front end.

pub mod csv_io;
pub mod error;
pub mod features;
pub mod lw;
pub mod model_doc;
pub mod plsr;
pub mod synth;
pub mod transforms;
pub mod validation;

pub use error::{Error, Result};
pub use features::{
    build_feature_matrix, extract_features, segment_cycle, CycleRecord, FeatureConfig,
    FeatureMatrix, FeatureVector,
};
pub use lw::{choose_k, predict_lw, DistanceMetric, LwConfig, LwPredictor, Weighting};
pub use model_doc::{read_model_doc, write_model_doc, ModelDocument, SelectionMeta};
pub use plsr::{PlsrModel, ScalingSpec};
pub use synth::{generate, paper_schedule, NoiseKind, ScheduleEntry, SynthConfig};
pub use transforms::{apply_log, delog_predictions, fit_log_spec, LogTransformSpec};
pub use validation::{
    build_report, fit_model, group_stats, loocv, rmse, rmsem, select_components,
    select_from_curve, uncertainty, uncertainty_in_range, FittedInner, FittedModel, GroupStats,
    LwParams, ModelReport, ModelSpec, PredictionRecord, Selection, Variant,
};
