//! Causal predict-then-update loop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ewls::nominal_scale;
use crate::mlpol::MlpolState;
use crate::pool::{EwlsGrid, ExpertPool, PoolConfig};
use crate::timestamp::Timestamp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub timestamp: Timestamp,
    pub y: f64,
    /// Base predictions, available before `y` is revealed.
    pub z: Vec<f64>,
}

/// Check ordering, finiteness and width of a stream. Rows are reported 1-based.
pub fn validate_stream(stream: &[Observation], m_base: usize) -> Result<()> {
    for (i, obs) in stream.iter().enumerate() {
        let row = i + 1;
        if obs.z.len() != m_base {
            return Err(Error::Ingest {
                row,
                column: None,
                msg: format!("expected {m_base} base predictions, found {}", obs.z.len()),
            });
        }
        if !obs.y.is_finite() {
            return Err(Error::Ingest {
                row,
                column: Some("target".into()),
                msg: format!("non-finite target {}", obs.y),
            });
        }
        if let Some(j) = obs.z.iter().position(|v| !v.is_finite()) {
            return Err(Error::Ingest {
                row,
                column: Some(format!("base {}", j + 1)),
                msg: format!("non-finite base prediction {}", obs.z[j]),
            });
        }
        if i > 0 {
            let prev = &stream[i - 1].timestamp;
            if !prev.same_kind(&obs.timestamp) {
                return Err(Error::Ingest {
                    row,
                    column: Some("timestamp".into()),
                    msg: "dates and integer indices are mixed".into(),
                });
            }
            if obs.timestamp <= *prev {
                return Err(Error::Ingest {
                    row,
                    column: Some("timestamp".into()),
                    msg: format!("timestamp {} does not follow {prev}", obs.timestamp),
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// MLpol over the raw base forecasts only.
    BaseOnly,
    /// MLpol over the EWLS experts only.
    EwlsOnly,
    /// MLpol over base and EWLS experts together.
    Combined,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::BaseOnly, Variant::EwlsOnly, Variant::Combined];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::BaseOnly => "base_only",
            Variant::EwlsOnly => "ewls_only",
            Variant::Combined => "combined",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown variant '{s}'")))
    }
}

/// Identity of one entry of a variant's expert vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpertLabel {
    Base { index: usize },
    Ewls { gamma: f64 },
}

impl ExpertLabel {
    /// Nominal memory length; `None` for base experts.
    pub fn nominal_scale(&self) -> Option<f64> {
        match self {
            ExpertLabel::Base { .. } => None,
            ExpertLabel::Ewls { gamma } => Some(nominal_scale(*gamma)),
        }
    }
}

impl fmt::Display for ExpertLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpertLabel::Base { index } => write!(f, "base_{}", index + 1),
            ExpertLabel::Ewls { gamma } => write!(f, "ewls_gamma_{gamma}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub timestamp: Timestamp,
    pub expert_preds: Vec<f64>,
    pub agg_pred: f64,
    pub y: f64,
    /// MLpol weights used for this step's aggregate (pre-update).
    pub weights: Vec<f64>,
    pub ewls_full_norms: Vec<f64>,
    pub ewls_slope_norms: Vec<f64>,
    /// Step falls inside the EWLS cold start.
    pub warmup: bool,
}

impl RunRecord {
    pub fn squared_error(&self) -> f64 {
        let e = self.agg_pred - self.y;
        e * e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub variant: Variant,
    pub experts: Vec<ExpertLabel>,
    pub coldstart_len: usize,
    pub records: Vec<RunRecord>,
}

/// A run that stopped early; `records` holds every completed step.
#[derive(Debug, thiserror::Error)]
#[error("run aborted after {} completed steps: {source}", .records.len())]
pub struct RunError {
    pub records: Vec<RunRecord>,
    #[source]
    pub source: Error,
}

impl From<Error> for RunError {
    fn from(source: Error) -> Self {
        RunError {
            records: Vec::new(),
            source,
        }
    }
}

impl From<RunError> for Error {
    fn from(e: RunError) -> Self {
        e.source
    }
}

/// The full combined run.
pub fn run_stream(stream: &[Observation], config: &PoolConfig) -> Result<RunOutput, RunError> {
    run_variant(stream, config, Variant::Combined)
}

pub fn run_variant(
    stream: &[Observation],
    config: &PoolConfig,
    variant: Variant,
) -> Result<RunOutput, RunError> {
    validate_stream(stream, config.m_base)?;
    let mut config = config.clone();
    if variant == Variant::BaseOnly {
        config.grid = EwlsGrid::Off;
    }
    let mut pool = ExpertPool::new(config)?;
    let m = pool.m();
    let selected = match variant {
        Variant::BaseOnly => 0..m,
        Variant::EwlsOnly => m..pool.n(),
        Variant::Combined => 0..pool.n(),
    };
    let mut experts: Vec<ExpertLabel> = (0..m).map(|index| ExpertLabel::Base { index }).collect();
    experts.extend(
        pool.gammas()
            .into_iter()
            .map(|gamma| ExpertLabel::Ewls { gamma }),
    );
    let experts = experts[selected.clone()].to_vec();
    let mut mlpol = MlpolState::new(selected.len())?;

    let coldstart_len = pool.config().coldstart_len;
    let mut records = Vec::with_capacity(stream.len());
    for obs in stream {
        let step = || -> Result<RunRecord> {
            let warmup = pool.in_cold_start();
            let (ewls_full_norms, ewls_slope_norms) =
                pool.states().iter().map(|s| s.coefficient_norms()).unzip();
            let all = pool.predict(&obs.z)?;
            let expert_preds = all[selected.clone()].to_vec();
            let weights = mlpol.weights();
            let agg_pred = mlpol.aggregate(&expert_preds)?;
            Ok(RunRecord {
                timestamp: obs.timestamp,
                expert_preds,
                agg_pred,
                y: obs.y,
                weights,
                ewls_full_norms,
                ewls_slope_norms,
                warmup,
            })
        };
        let record = match step() {
            Ok(r) => r,
            Err(source) => return Err(RunError { records, source }),
        };
        let reveal = pool.update(&obs.z, obs.y).and_then(|_| {
            mlpol
                .observe(&record.expert_preds, record.agg_pred, obs.y)
                .map(|_| ())
        });
        records.push(record);
        if let Err(source) = reveal {
            return Err(RunError { records, source });
        }
    }
    Ok(RunOutput {
        variant,
        experts,
        coldstart_len,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(t: i64, y: f64, z: Vec<f64>) -> Observation {
        Observation {
            timestamp: Timestamp::Index(t),
            y,
            z,
        }
    }

    #[test]
    fn single_base_expert_passes_through() {
        let stream: Vec<_> = (0..20)
            .map(|t| obs(t, (t as f64).sin(), vec![t as f64]))
            .collect();
        let out = run_variant(
            &stream,
            &PoolConfig::new(1, EwlsGrid::Off),
            Variant::Combined,
        )
        .unwrap();
        for (r, o) in out.records.iter().zip(&stream) {
            assert_eq!(r.agg_pred, o.z[0]);
            assert!(r.ewls_full_norms.is_empty());
        }
    }

    #[test]
    fn constant_experts_lock_on_to_target() {
        let stream: Vec<_> = (0..50).map(|t| obs(t, 2.0, vec![0.0, 2.0])).collect();
        let out = run_variant(
            &stream,
            &PoolConfig::new(2, EwlsGrid::Off),
            Variant::BaseOnly,
        )
        .unwrap();
        assert_eq!(out.records[0].weights, vec![0.5, 0.5]);
        for r in &out.records[1..] {
            assert_eq!(r.weights, vec![0.0, 1.0]);
            assert_eq!(r.agg_pred, 2.0);
        }
        let loss: f64 = out.records.iter().map(|r| r.squared_error()).sum();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn variant_shapes() {
        let stream: Vec<_> = (0..30)
            .map(|t| {
                obs(
                    t,
                    t as f64 * 0.1,
                    vec![t as f64 * 0.09, 1.0, t as f64 * 0.11],
                )
            })
            .collect();
        let cfg = PoolConfig::new(
            3,
            EwlsGrid::Fixed {
                gammas: vec![0.9, 0.99],
            },
        );
        let e = run_variant(&stream, &cfg, Variant::EwlsOnly).unwrap();
        assert_eq!(e.records[0].weights.len(), 2);
        assert_eq!(e.records[0].ewls_full_norms.len(), 2);
        let c = run_variant(&stream, &cfg, Variant::Combined).unwrap();
        assert_eq!(c.records[0].weights.len(), 5);
        assert_eq!(c.records.iter().filter(|r| r.warmup).count(), 8);
        let b = run_variant(&stream, &cfg, Variant::BaseOnly).unwrap();
        assert_eq!(b.records[0].weights.len(), 3);
        assert!(b.records[0].ewls_full_norms.is_empty());
    }

    #[test]
    fn empty_ewls_pool_is_a_config_error() {
        let stream = vec![obs(0, 1.0, vec![1.0])];
        let err = run_variant(
            &stream,
            &PoolConfig::new(1, EwlsGrid::Off),
            Variant::EwlsOnly,
        )
        .unwrap_err();
        assert!(matches!(err.source, Error::Config(_)));
    }

    #[test]
    fn stream_violations_name_the_row() {
        let stream = vec![obs(0, 1.0, vec![1.0]), obs(0, 1.0, vec![1.0])];
        let err = run_stream(&stream, &PoolConfig::new(1, EwlsGrid::Off)).unwrap_err();
        assert!(matches!(err.source, Error::Ingest { row: 2, .. }));
        let stream = vec![obs(0, 1.0, vec![1.0]), obs(1, f64::NAN, vec![1.0])];
        let err = run_stream(&stream, &PoolConfig::new(1, EwlsGrid::Off)).unwrap_err();
        assert!(matches!(err.source, Error::Ingest { row: 2, .. }));
        let stream = vec![obs(0, 1.0, vec![1.0, 2.0])];
        assert!(run_stream(&stream, &PoolConfig::new(1, EwlsGrid::Off)).is_err());
    }

    #[test]
    fn numerical_failure_keeps_partial_records() {
        let mut stream: Vec<_> = (0..10).map(|t| obs(t, 1.0, vec![1.0])).collect();
        stream.push(obs(10, 1e300, vec![1e300]));
        stream.push(obs(11, 1.0, vec![1.0]));
        let cfg = PoolConfig::new(1, EwlsGrid::Fixed { gammas: vec![0.9] });
        let err = run_stream(&stream, &cfg).unwrap_err();
        assert!(matches!(err.source, Error::Numerical { .. }), "{err}");
        assert!(err.records.len() >= 10);
    }
}
