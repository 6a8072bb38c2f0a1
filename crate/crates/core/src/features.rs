//! Segment mean/slope features from temperature-cycle conductance traces.
//!
//! Each cycle is split into `R` contiguous index ranges. Every range
//! contributes two features: the arithmetic mean of the conductance and the
//! least-squares slope of conductance versus time, giving a fixed-width
//! `2R` feature vector regardless of cycle length.

use std::ops::Range;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// One temperature cycle of timestamped conductance samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle_id: i64,
    /// Sample times in seconds, strictly increasing.
    pub t: Vec<f64>,
    /// Conductance samples in siemens, same length as `t`.
    pub g: Vec<f64>,
    /// True concentration in ppb when known.
    pub concentration: Option<f64>,
}

impl CycleRecord {
    pub fn new(cycle_id: i64, t: Vec<f64>, g: Vec<f64>, concentration: Option<f64>) -> Result<Self> {
        if t.len() != g.len() {
            return Err(Error::InvalidCycle {
                cycle_id,
                reason: format!("{} timestamps but {} conductance samples", t.len(), g.len()),
            });
        }
        if t.is_empty() {
            return Err(Error::InvalidCycle {
                cycle_id,
                reason: "cycle has no samples".into(),
            });
        }
        for window in t.windows(2) {
            if window[1] <= window[0] || window[1].is_nan() || window[0].is_nan() {
                return Err(Error::InvalidCycle {
                    cycle_id,
                    reason: format!(
                        "timestamps must be strictly increasing ({} then {})",
                        window[0], window[1]
                    ),
                });
            }
        }
        if let Some(&bad) = t.iter().chain(g.iter()).find(|v| !v.is_finite()) {
            return Err(Error::InvalidCycle {
                cycle_id,
                reason: format!("non-finite sample {bad}"),
            });
        }
        if let Some(c) = concentration {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidCycle {
                    cycle_id,
                    reason: format!("concentration {c} must be finite and non-negative"),
                });
            }
        }
        Ok(Self { cycle_id, t, g, concentration })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Segmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    /// Number of segments R per cycle.
    pub n_segments: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { n_segments: 10 }
    }
}

impl FeatureConfig {
    pub fn new(n_segments: usize) -> Result<Self> {
        if n_segments == 0 {
            return Err(Error::Config("n_segments must be at least 1".into()));
        }
        Ok(Self { n_segments })
    }
}

/// Features of one cycle: `R` segment means followed by `R` segment slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub cycle_id: i64,
    pub concentration: Option<f64>,
    /// Segment means in siemens.
    pub means: Vec<f64>,
    /// Segment slopes in siemens per second.
    pub slopes: Vec<f64>,
}

impl FeatureVector {
    /// Flattened row in the fixed column order `[mean_1..mean_R, slope_1..slope_R]`.
    pub fn to_row(&self) -> Vec<f64> {
        self.means.iter().chain(self.slopes.iter()).copied().collect()
    }
}

/// Feature rows for a set of cycles plus their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// n_samples x 2R.
    pub x: Array2<f64>,
    pub cycle_ids: Vec<i64>,
    /// Per-row concentration in ppb; `None` rows are only usable for prediction.
    pub labels: Vec<Option<f64>>,
    pub column_labels: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Concentration vector for training. Errors on the first unlabeled cycle.
    pub fn training_y(&self) -> Result<Array1<f64>> {
        let mut y = Vec::with_capacity(self.labels.len());
        for (row, label) in self.labels.iter().enumerate() {
            match label {
                Some(c) => y.push(*c),
                None => {
                    return Err(Error::UnlabeledCycle { cycle_id: self.cycle_ids[row] });
                }
            }
        }
        Ok(Array1::from_vec(y))
    }
}

/// Column labels for a given segment count: `mean_1..mean_R, slope_1..slope_R`.
pub fn column_labels(n_segments: usize) -> Vec<String> {
    let means = (1..=n_segments).map(|i| format!("mean_{i}"));
    let slopes = (1..=n_segments).map(|i| format!("slope_{i}"));
    means.chain(slopes).collect()
}

/// Splits a cycle into `R` contiguous index ranges covering every sample.
///
/// Range sizes differ by at most one; when the length is not divisible by
/// `R` the remainder samples go to the earliest segments. Every segment must
/// hold at least two samples so that a slope is defined, so cycles shorter
/// than `2R` are rejected.
pub fn segment_cycle(cycle: &CycleRecord, config: &FeatureConfig) -> Result<Vec<Range<usize>>> {
    let r = config.n_segments;
    let len = cycle.len();
    if len < 2 * r {
        return Err(Error::CycleTooShort {
            cycle_id: cycle.cycle_id,
            len,
            min: 2 * r,
            segments: r,
        });
    }
    let base = len / r;
    let remainder = len % r;
    let mut ranges = Vec::with_capacity(r);
    let mut start = 0;
    for i in 0..r {
        let size = base + usize::from(i < remainder);
        ranges.push(start..start + size);
        start += size;
    }
    debug_assert_eq!(start, len);
    Ok(ranges)
}

/// Computes the `2R` mean/slope features of one cycle.
///
/// The slope is the ordinary least-squares coefficient of conductance versus
/// actual sample time within the segment, so irregular timestamps are handled
/// even though segmentation itself is by sample index.
pub fn extract_features(cycle: &CycleRecord, config: &FeatureConfig) -> Result<FeatureVector> {
    let ranges = segment_cycle(cycle, config)?;
    let mut means = Vec::with_capacity(ranges.len());
    let mut slopes = Vec::with_capacity(ranges.len());
    for range in ranges {
        let t = &cycle.t[range.clone()];
        let g = &cycle.g[range.clone()];
        let n = t.len() as f64;
        let t_mean = t.iter().sum::<f64>() / n;
        let g_mean = g.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut var = 0.0;
        for (&ti, &gi) in t.iter().zip(g) {
            let dt = ti - t_mean;
            cov += dt * (gi - g_mean);
            var += dt * dt;
        }
        if var == 0.0 {
            return Err(Error::InvalidCycle {
                cycle_id: cycle.cycle_id,
                reason: format!("segment {range:?} has no time spread; slope undefined"),
            });
        }
        let slope = cov / var;
        if !g_mean.is_finite() || !slope.is_finite() {
            return Err(Error::InvalidCycle {
                cycle_id: cycle.cycle_id,
                reason: format!("segment {range:?} produced a non-finite feature"),
            });
        }
        means.push(g_mean);
        slopes.push(slope);
    }
    Ok(FeatureVector {
        cycle_id: cycle.cycle_id,
        concentration: cycle.concentration,
        means,
        slopes,
    })
}

/// Extracts features for every cycle, preserving input order.
///
/// An empty cycle list yields an empty matrix that still carries `2R`
/// columns. Labels are kept per row; training consumers call
/// [`FeatureMatrix::training_y`] which rejects unlabeled rows.
pub fn build_feature_matrix(cycles: &[CycleRecord], config: &FeatureConfig) -> Result<FeatureMatrix> {
    let width = 2 * config.n_segments;
    let mut data = Vec::with_capacity(cycles.len() * width);
    let mut cycle_ids = Vec::with_capacity(cycles.len());
    let mut labels = Vec::with_capacity(cycles.len());
    for cycle in cycles {
        let features = extract_features(cycle, config)?;
        data.extend(features.to_row());
        cycle_ids.push(features.cycle_id);
        labels.push(features.concentration);
    }
    let x = Array2::from_shape_vec((cycles.len(), width), data)
        .expect("row width is fixed by construction");
    Ok(FeatureMatrix {
        x,
        cycle_ids,
        labels,
        column_labels: column_labels(config.n_segments),
    })
}
