//! Seeded regime-shift streams with a known comparator path.
//!
//! A latent signal (level 1, weekly cycle, AR(1) wander) is observed by `M`
//! base forecasters with cross-correlated errors. Targets are an affine
//! combination of the base forecasts plus noise, with coefficients that are
//! constant within a segment up to a linear drift, and jump between segments
//! through the per-segment level shift on the intercept.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::Observation;
use crate::error::{Error, Result};
use crate::timestamp::Timestamp;

fn default_base_error_sd() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub len: usize,
    /// Affine coefficients, slopes first and intercept last (`M + 1` entries).
    pub coeffs: Vec<f64>,
    /// Euclidean coefficient movement per step, along a seeded slope direction.
    #[serde(default)]
    pub drift_rate: f64,
    /// Added to the intercept for the whole segment.
    #[serde(default)]
    pub level_shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Total steps; must equal the sum of segment lengths.
    pub t: usize,
    pub m_base: usize,
    pub segments: Vec<SegmentSpec>,
    pub noise_sd: f64,
    /// Pairwise correlation of base errors; negative values alternate the
    /// sign of the shared component across experts.
    pub base_error_corr: f64,
    #[serde(default = "default_base_error_sd")]
    pub base_error_sd: f64,
    pub seed: u64,
    /// Daily dates from here when set, integer indices from 0 otherwise.
    #[serde(default)]
    pub start_date: Option<NaiveDate>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m_base == 0 {
            return Err(Error::config("scenario needs at least one base forecaster"));
        }
        if self.segments.is_empty() {
            return Err(Error::config("scenario needs at least one segment"));
        }
        let total: usize = self.segments.iter().map(|s| s.len).sum();
        if total != self.t {
            return Err(Error::config(format!(
                "segment lengths sum to {total}, expected {}",
                self.t
            )));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if s.len == 0 {
                return Err(Error::config(format!("segment {} is empty", i + 1)));
            }
            if s.coeffs.len() != self.m_base + 1 {
                return Err(Error::config(format!(
                    "segment {} has {} coefficients, expected {}",
                    i + 1,
                    s.coeffs.len(),
                    self.m_base + 1
                )));
            }
            if !(s.drift_rate >= 0.0 && s.drift_rate.is_finite()) || !s.level_shift.is_finite() {
                return Err(Error::config(format!(
                    "segment {} has invalid drift or shift",
                    i + 1
                )));
            }
        }
        if !(self.noise_sd >= 0.0 && self.base_error_sd >= 0.0) {
            return Err(Error::config("noise scales must be nonnegative"));
        }
        if !(-1.0..=1.0).contains(&self.base_error_corr) {
            return Err(Error::config(format!(
                "base error correlation {} outside [-1, 1]",
                self.base_error_corr
            )));
        }
        Ok(())
    }

    pub fn timestamp(&self, t: usize) -> Timestamp {
        match self.start_date {
            Some(d) => Timestamp::Date(d).offset(t as i64),
            None => Timestamp::Index(t as i64),
        }
    }

    /// Start index of every segment.
    pub fn segment_starts(&self) -> Vec<usize> {
        self.segments
            .iter()
            .scan(0, |acc, s| {
                let start = *acc;
                *acc += s.len;
                Some(start)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub stream: Vec<Observation>,
    /// Realised affine coefficient at every step.
    pub comparator_path: Vec<Vec<f64>>,
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let m = spec.m_base;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    // Drift directions first so they do not depend on T.
    let directions: Vec<Vec<f64>> = spec
        .segments
        .iter()
        .map(|_| {
            let v: Vec<f64> = (0..m).map(|_| normal()).collect();
            let norm = v
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let mut dir: Vec<f64> = v.iter().map(|x| x / norm).collect();
            dir.push(0.0);
            dir
        })
        .collect();

    let rho = spec.base_error_corr;
    let shared = rho.abs().sqrt();
    let own = (1.0 - rho.abs()).sqrt();
    let signs: Vec<f64> = (0..m)
        .map(|j| if rho < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 })
        .collect();

    let mut stream = Vec::with_capacity(spec.t);
    let mut path = Vec::with_capacity(spec.t);
    let mut wander = 0.0;
    let mut t = 0usize;
    for (seg, dir) in spec.segments.iter().zip(&directions) {
        for k in 0..seg.len {
            let mut u = seg.coeffs.clone();
            u[m] += seg.level_shift;
            for (c, d) in u.iter_mut().zip(dir) {
                *c += seg.drift_rate * k as f64 * d;
            }

            wander = 0.95 * wander + 0.03 * normal();
            let signal = 1.0 + 0.1 * (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin() + wander;
            let common = normal();
            let z: Vec<f64> = (0..m)
                .map(|j| {
                    signal + spec.base_error_sd * (signs[j] * shared * common + own * normal())
                })
                .collect();
            let y = u[..m].iter().zip(&z).map(|(c, v)| c * v).sum::<f64>()
                + u[m]
                + spec.noise_sd * normal();

            stream.push(Observation {
                timestamp: spec.timestamp(t),
                y,
                z,
            });
            path.push(u);
            t += 1;
        }
    }
    Ok(Scenario {
        stream,
        comparator_path: path,
    })
}

fn equal_weights(m: usize) -> Vec<f64> {
    let mut c = vec![1.0 / m as f64; m];
    c.push(0.0);
    c
}

/// Stable regime followed by a persistent −15% level shift (T = 750, M = 4).
pub fn level_shift_scenario(seed: u64) -> ScenarioSpec {
    let m = 4;
    ScenarioSpec {
        t: 750,
        m_base: m,
        segments: vec![
            SegmentSpec {
                len: 450,
                coeffs: equal_weights(m),
                drift_rate: 0.0,
                level_shift: 0.0,
            },
            SegmentSpec {
                len: 300,
                coeffs: equal_weights(m),
                drift_rate: 0.0,
                level_shift: -0.15,
            },
        ],
        noise_sd: 0.02,
        base_error_corr: 0.3,
        base_error_sd: 0.1,
        seed,
        start_date: None,
    }
}

/// Stable regime followed by a segment of heavy linear coefficient drift.
pub fn drift_scenario(seed: u64) -> ScenarioSpec {
    let m = 3;
    ScenarioSpec {
        t: 2000,
        m_base: m,
        segments: vec![
            SegmentSpec {
                len: 1000,
                coeffs: equal_weights(m),
                drift_rate: 0.0,
                level_shift: 0.0,
            },
            SegmentSpec {
                len: 1000,
                coeffs: equal_weights(m),
                drift_rate: 0.004,
                level_shift: 0.0,
            },
        ],
        noise_sd: 0.05,
        base_error_corr: 0.0,
        base_error_sd: 0.3,
        seed,
        start_date: None,
    }
}
