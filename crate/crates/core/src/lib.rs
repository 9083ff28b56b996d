//! Memory-hedged online prediction.
//!
//! A pool of base forecasts is augmented with exponentially weighted
//! least-squares (forgotten RLS) correction experts at several memory scales,
//! and the whole pool is aggregated online with the MLpol rule. The crate also
//! carries the evaluation, diagnostic and paired block-bootstrap machinery
//! used to compare aggregation variants on chronological streams.
//!
//! The main entry points are [`engine::run_variant`] for a single causal pass
//! and [`experiment::run_experiment`] for the full file-to-report pipeline.

#![forbid(unsafe_code)]

pub mod bootstrap;
pub mod engine;
pub mod error;
pub mod eval;
pub mod ewls;
pub mod experiment;
pub mod io;
pub mod mlpol;
pub mod pool;
pub mod synthetic;
pub mod timestamp;

pub use engine::{run_stream, run_variant, Observation, RunOutput, RunRecord, Variant};
pub use error::{Error, Result};
pub use ewls::{EwlsConfig, EwlsState};
pub use mlpol::MlpolState;
pub use pool::{ExpertPool, GridSpec, PoolConfig};
pub use timestamp::Timestamp;
