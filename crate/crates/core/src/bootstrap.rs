//! Paired moving-block bootstrap over per-step squared losses.
//!
//! Every (replicate, regime) pair draws its block starts from its own ChaCha8
//! stream keyed by `(seed, replicate, regime name)`, and the same index
//! sequence is applied to every method. Results therefore do not depend on
//! method order, thread count or execution order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{regime_slices, rmse, RegimeSpec};
use crate::timestamp::Timestamp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub block_len_default: usize,
    /// Per-regime block lengths, keyed by regime name.
    pub block_len_overrides: BTreeMap<String, usize>,
    pub seed: u64,
    /// Central coverage of the percentile intervals.
    pub confidence: f64,
    /// Reference method for paired differences; first method when absent.
    pub anchor: Option<String>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 10_000,
            block_len_default: 14,
            block_len_overrides: BTreeMap::from([("lockdown".to_string(), 7)]),
            seed: 0,
            confidence: 0.95,
            anchor: None,
        }
    }
}

impl BootstrapConfig {
    pub fn block_len(&self, regime: &str) -> usize {
        self.block_len_overrides
            .get(regime)
            .copied()
            .unwrap_or(self.block_len_default)
    }
}

/// Per-step squared losses of several methods on a shared timeline.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTable {
    pub timestamps: Vec<Timestamp>,
    pub methods: IndexMap<String, Vec<f64>>,
}

impl LossTable {
    pub fn validate(&self) -> Result<()> {
        let t = self.timestamps.len();
        if self.methods.is_empty() {
            return Err(Error::Ingest {
                row: 0,
                column: None,
                msg: "loss table has no methods".into(),
            });
        }
        for (name, losses) in &self.methods {
            if losses.len() != t {
                return Err(Error::Ingest {
                    row: losses.len().min(t) + 1,
                    column: Some(name.clone()),
                    msg: format!("{} losses for {t} timestamps", losses.len()),
                });
            }
            if let Some(i) = losses.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(Error::Ingest {
                    row: i + 1,
                    column: Some(name.clone()),
                    msg: format!("loss {} is not a finite nonnegative value", losses[i]),
                });
            }
        }
        if let Some(i) = (1..t).find(|&i| self.timestamps[i] <= self.timestamps[i - 1]) {
            return Err(Error::Ingest {
                row: i + 1,
                column: Some("timestamp".into()),
                msg: "timestamps must be strictly increasing".into(),
            });
        }
        Ok(())
    }
}

/// Moving-block index sequence of length `len`: `⌈len/block⌉` starts drawn
/// uniformly from `0..=len-block`, blocks concatenated and truncated.
pub fn resample_indices<R: Rng + ?Sized>(
    len: usize,
    block: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if block == 0 || block > len {
        return Err(Error::config(format!(
            "block length {block} must lie in [1, {len}]"
        )));
    }
    let n_blocks = len.div_ceil(block);
    let mut out = Vec::with_capacity(n_blocks * block);
    for _ in 0..n_blocks {
        let start = rng.random_range(0..=len - block);
        out.extend(start..start + block);
    }
    out.truncate(len);
    Ok(out)
}

/// Empirical quantile with linear interpolation between order statistics:
/// position `q·(n−1)` in the sorted sample, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Report("percentile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            value: q,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    })
}

/// Deterministic generator for one (seed, replicate, regime) cell.
pub fn cell_rng(seed: u64, replicate: usize, regime: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(replicate as u64).to_le_bytes());
    key[16..24].copy_from_slice(&fnv1a(regime.as_bytes()).to_le_bytes());
    key[24..].copy_from_slice(&(regime.len() as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodInterval {
    pub method: String,
    pub regime: String,
    pub block_len: usize,
    #[serde(flatten)]
    pub rmse: Interval,
}

/// `RMSE(method) − RMSE(anchor)` with its paired bootstrap interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: String,
    pub anchor: String,
    pub regime: String,
    #[serde(flatten)]
    pub delta: Interval,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replicates: usize,
    pub seed: u64,
    pub confidence: f64,
    pub per_method: Vec<MethodInterval>,
    pub comparisons: Vec<Comparison>,
}

impl BootstrapReport {
    /// `method,regime,point,lo,hi,significant`; comparison rows are named `Δ <method> vs <anchor>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,regime,point,lo,hi,significant\n");
        for m in &self.per_method {
            writeln!(
                out,
                "{},{},{},{},{},",
                m.method, m.regime, m.rmse.point, m.rmse.lo, m.rmse.hi
            )
            .unwrap();
        }
        for c in &self.comparisons {
            writeln!(
                out,
                "delta:{}-{},{},{},{},{},{}",
                c.method, c.anchor, c.regime, c.delta.point, c.delta.lo, c.delta.hi, c.significant
            )
            .unwrap();
        }
        out
    }
}

pub fn paired_bootstrap(
    table: &LossTable,
    regimes: &[RegimeSpec],
    config: &BootstrapConfig,
) -> Result<BootstrapReport> {
    table.validate()?;
    if config.replicates == 0 {
        return Err(Error::config("bootstrap needs at least one replicate"));
    }
    if !(config.confidence > 0.0 && config.confidence < 1.0) {
        return Err(Error::config(format!(
            "confidence {} outside (0, 1)",
            config.confidence
        )));
    }
    let anchor = match &config.anchor {
        Some(a) if table.methods.contains_key(a) => a.clone(),
        Some(a) => {
            return Err(Error::config(format!(
                "anchor method '{a}' not in the loss table"
            )))
        }
        None => table
            .methods
            .keys()
            .next()
            .cloned()
            .expect("validated non-empty"),
    };
    let slices = regime_slices(&table.timestamps, regimes)?;
    for (name, range) in &slices {
        let b = config.block_len(name);
        if b == 0 || b > range.len() {
            return Err(Error::config(format!(
                "block length {b} for regime '{name}' must lie in [1, {}]",
                range.len()
            )));
        }
    }
    let methods: Vec<(&String, &Vec<f64>)> = table.methods.iter().collect();
    let lo_q = (1.0 - config.confidence) / 2.0;
    let hi_q = 1.0 - lo_q;

    let mut per_method = Vec::new();
    let mut comparisons = Vec::new();
    for (regime, range) in &slices {
        let block = config.block_len(regime);
        let len = range.len();
        // replicate × method RMSEs for this regime
        let draws: Vec<Vec<f64>> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = cell_rng(config.seed, rep, regime);
                let idx = resample_indices(len, block, &mut rng).expect("block length checked");
                methods
                    .iter()
                    .map(|(_, losses)| rmse(idx.iter().map(|&i| losses[range.start + i])))
                    .collect()
            })
            .collect();
        let points: Vec<f64> = methods
            .iter()
            .map(|(_, losses)| rmse(losses[range.clone()].iter().copied()))
            .collect();
        let anchor_pos = methods
            .iter()
            .position(|(m, _)| **m == anchor)
            .expect("anchor present");
        for (j, (name, _)) in methods.iter().enumerate() {
            let mut samples: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            samples.sort_by(f64::total_cmp);
            per_method.push(MethodInterval {
                method: (*name).clone(),
                regime: regime.clone(),
                block_len: block,
                rmse: Interval {
                    point: points[j],
                    lo: percentile(&samples, lo_q)?,
                    hi: percentile(&samples, hi_q)?,
                },
            });
            if j == anchor_pos {
                continue;
            }
            let mut diffs: Vec<f64> = draws.iter().map(|d| d[j] - d[anchor_pos]).collect();
            diffs.sort_by(f64::total_cmp);
            let delta = Interval {
                point: points[j] - points[anchor_pos],
                lo: percentile(&diffs, lo_q)?,
                hi: percentile(&diffs, hi_q)?,
            };
            comparisons.push(Comparison {
                method: (*name).clone(),
                anchor: anchor.clone(),
                regime: regime.clone(),
                significant: delta.excludes_zero(),
                delta,
            });
        }
    }
    Ok(BootstrapReport {
        replicates: config.replicates,
        seed: config.seed,
        confidence: config.confidence,
        per_method,
        comparisons,
    })
}
