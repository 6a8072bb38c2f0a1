//! Deterministic synthetic cycle generator with a power-law gas response.
//!
//! Each generated sample is
//!
//! ```text
//! g_m(t_j) = g0(t_j) * (1 + a(t_j) * c^b(t_j)) * (1 + drift_rate * m) * eps
//! ```
//!
//! where `m` is the global cycle index, `c` the cycle's concentration
//! (`0^b` defined as 0 so background cycles are exactly baseline), and `eps`
//! multiplicative lognormal noise with median 1. The response enters
//! multiplicatively on a strictly positive baseline, so conductance and
//! segment means stay positive. Noise is drawn from a per-cycle PRNG stream
//! keyed by the cycle index: inserting or removing schedule entries never
//! perturbs the noise of other cycle ids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CycleRecord;

/// One block of the exposure schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub concentration_ppb: f64,
    pub n_cycles: usize,
}

impl ScheduleEntry {
    pub fn new(concentration_ppb: f64, n_cycles: usize) -> Self {
        Self { concentration_ppb, n_cycles }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Lognormal factor with median 1 and log-sd `noise_sigma`; keeps
    /// samples positive.
    #[default]
    LognormalMultiplicative,
    /// Gaussian term `noise_sigma * z * g0(t)` added to the sample.
    GaussianAdditive,
}

/// Generator configuration. Per-sample profile arrays must share one length,
/// which is the cycle length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Baseline conductance profile g0 in siemens, strictly positive.
    pub baseline: Vec<f64>,
    /// Per-sample response sensitivity a(t), non-negative.
    pub sensitivity: Vec<f64>,
    /// Per-sample response exponent b(t), strictly positive.
    pub exponent: Vec<f64>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_kind: NoiseKind,
    /// Relative baseline drift per cycle.
    #[serde(default)]
    pub drift_rate: f64,
    pub schedule: Vec<ScheduleEntry>,
    pub seed: u64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
}

fn default_schema_version() -> u32 {
    1
}

fn default_sample_rate() -> f64 {
    4.0
}

/// Default cycle length: two 20 s temperature ramps sampled at 4 Hz.
pub const DEFAULT_CYCLE_LEN: usize = 160;

/// Triangular heater phase: 0 at the cycle edges, 1 at the apex. The apex
/// sits exactly on a sample boundary so every default segment is strictly
/// monotone in temperature.
fn heater_phase(j: usize, len: usize) -> f64 {
    let l = len as f64;
    1.0 - ((2 * j) as f64 - l).abs() / l
}

/// Default baseline: conductance rises with temperature, following the
/// up-down heater ramp with a mild quadratic bow. The slope magnitude stays
/// bounded away from zero on both flanks.
pub fn default_baseline(len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let phase = heater_phase(j, len);
            2.0e-5 * (1.0 + 2.0 * phase + 0.5 * phase * phase)
        })
        .collect()
}

/// Default sensitivity profile, varying smoothly over the cycle in
/// [0.05, 0.3].
pub fn default_sensitivity(len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let angle = 2.0 * std::f64::consts::PI * j as f64 / len as f64 + 0.9;
            0.05 + 0.25 * 0.5 * (1.0 - angle.cos())
        })
        .collect()
}

/// Default exponent profile, varying smoothly over the cycle in [0.4, 0.8].
pub fn default_exponent(len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let angle = 4.0 * std::f64::consts::PI * j as f64 / len as f64 + 2.1;
            0.4 + 0.4 * 0.5 * (1.0 - angle.cos())
        })
        .collect()
}

/// The measurement protocol's exposure order: a long background block, the
/// concentration staircase downward from 40 ppb with background flushes in
/// between, then the same staircase in reverse so drift shows up in both
/// directions. Every concentration totals 30 gas cycles.
pub fn paper_schedule() -> Vec<ScheduleEntry> {
    const GAS: [f64; 5] = [40.0, 20.0, 10.0, 5.0, 2.5];
    const CYCLES_PER_EXPOSURE: usize = 15;
    let mut schedule = vec![ScheduleEntry::new(0.0, 100)];
    for &c in GAS.iter() {
        schedule.push(ScheduleEntry::new(c, CYCLES_PER_EXPOSURE));
        schedule.push(ScheduleEntry::new(0.0, CYCLES_PER_EXPOSURE));
    }
    for &c in GAS.iter().rev() {
        schedule.push(ScheduleEntry::new(c, CYCLES_PER_EXPOSURE));
        schedule.push(ScheduleEntry::new(0.0, CYCLES_PER_EXPOSURE));
    }
    schedule
}

impl SynthConfig {
    /// Full measurement-campaign preset: default profiles, mild noise and
    /// drift, and the staircase exposure schedule.
    pub fn paper_preset(seed: u64) -> Self {
        Self {
            schema_version: 1,
            baseline: default_baseline(DEFAULT_CYCLE_LEN),
            sensitivity: default_sensitivity(DEFAULT_CYCLE_LEN),
            exponent: default_exponent(DEFAULT_CYCLE_LEN),
            noise_sigma: 0.02,
            noise_kind: NoiseKind::default(),
            drift_rate: 5.0e-4,
            schedule: paper_schedule(),
            seed,
            sample_rate_hz: 4.0,
        }
    }

    pub fn cycle_len(&self) -> usize {
        self.baseline.len()
    }

    pub fn total_cycles(&self) -> usize {
        self.schedule.iter().map(|e| e.n_cycles).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        let len = self.baseline.len();
        if len == 0 {
            return Err(Error::Config("baseline profile is empty".into()));
        }
        if self.sensitivity.len() != len || self.exponent.len() != len {
            return Err(Error::Config(format!(
                "profile lengths differ: baseline {len}, sensitivity {}, exponent {}",
                self.sensitivity.len(),
                self.exponent.len()
            )));
        }
        if self.baseline.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::Config("baseline must be strictly positive and finite".into()));
        }
        if self.sensitivity.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Config("sensitivity must be non-negative and finite".into()));
        }
        if self.exponent.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::Config("exponent must be strictly positive and finite".into()));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if !self.drift_rate.is_finite() {
            return Err(Error::Config("drift_rate must be finite".into()));
        }
        if self.schedule.is_empty() || self.total_cycles() == 0 {
            return Err(Error::Config("schedule must contain at least one cycle".into()));
        }
        for entry in &self.schedule {
            if !entry.concentration_ppb.is_finite() || entry.concentration_ppb < 0.0 {
                return Err(Error::Config(format!(
                    "schedule concentration {} must be finite and non-negative",
                    entry.concentration_ppb
                )));
            }
        }
        if self.sample_rate_hz <= 0.0 || !self.sample_rate_hz.is_finite() {
            return Err(Error::Config("sample_rate_hz must be positive".into()));
        }
        Ok(())
    }
}

/// Generates the configured cycles in schedule order with sequential cycle
/// ids and a continuous global time axis. Same config in, bit-identical
/// cycles out.
pub fn generate(config: &SynthConfig) -> Result<Vec<CycleRecord>> {
    config.validate()?;
    let len = config.cycle_len();
    let dt = 1.0 / config.sample_rate_hz;
    let mut cycles = Vec::with_capacity(config.total_cycles());
    let mut m: usize = 0;

    for entry in &config.schedule {
        for _ in 0..entry.n_cycles {
            let c = entry.concentration_ppb;
            let drift = 1.0 + config.drift_rate * m as f64;
            // One noise stream per cycle, keyed by the global cycle index.
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(m as u64);

            let mut t = Vec::with_capacity(len);
            let mut g = Vec::with_capacity(len);
            for j in 0..len {
                let response = if c == 0.0 {
                    1.0
                } else {
                    1.0 + config.sensitivity[j] * c.powf(config.exponent[j])
                };
                let clean = config.baseline[j] * response * drift;
                let value = if config.noise_sigma == 0.0 {
                    clean
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    match config.noise_kind {
                        NoiseKind::LognormalMultiplicative => {
                            clean * (config.noise_sigma * z).exp()
                        }
                        NoiseKind::GaussianAdditive => {
                            clean + config.noise_sigma * z * config.baseline[j]
                        }
                    }
                };
                t.push((m * len + j) as f64 * dt);
                g.push(value);
            }
            cycles.push(CycleRecord::new(m as i64, t, g, Some(c))?);
            m += 1;
        }
    }
    Ok(cycles)
}
