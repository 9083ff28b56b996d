use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::engine::RunRecord;
use crate::error::{Error, Result};
use crate::timestamp::Timestamp;

/// Name of the whole-range pseudo-regime.
pub const OVERALL: &str = "overall";

/// Named inclusive timestamp range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub name: String,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl RegimeSpec {
    pub fn new(name: impl Into<String>, start: Timestamp, end: Timestamp) -> Self {
        RegimeSpec {
            name: name.into(),
            start,
            end,
        }
    }
}

/// The three-regime layout of the 2019-01-01 .. 2021-01-15 daily test window.
pub fn rte_regimes() -> Vec<RegimeSpec> {
    let d = |y, m, day| Timestamp::Date(NaiveDate::from_ymd_opt(y, m, day).expect("valid date"));
    vec![
        RegimeSpec::new("pre_lockdown", d(2019, 1, 1), d(2020, 3, 16)),
        RegimeSpec::new("lockdown", d(2020, 3, 17), d(2020, 5, 11)),
        RegimeSpec::new("post_lockdown", d(2020, 5, 12), d(2021, 1, 15)),
    ]
}

/// Index ranges of `timestamps` (sorted ascending) covered by each regime,
/// followed by the full range under [`OVERALL`].
pub fn regime_slices(
    timestamps: &[Timestamp],
    regimes: &[RegimeSpec],
) -> Result<Vec<(String, Range<usize>)>> {
    let mut out = Vec::with_capacity(regimes.len() + 1);
    for r in regimes {
        if r.name == OVERALL {
            return Err(Error::Report(format!(
                "regime name '{OVERALL}' is reserved"
            )));
        }
        if r.end < r.start {
            return Err(Error::Report(format!(
                "regime '{}' ends before it starts",
                r.name
            )));
        }
        let lo = timestamps.partition_point(|t| *t < r.start);
        let hi = timestamps.partition_point(|t| *t <= r.end);
        if lo >= hi {
            return Err(Error::Report(format!(
                "regime '{}' covers no observations",
                r.name
            )));
        }
        if let Some((other, _)) = out
            .iter()
            .find(|(_, range): &&(String, Range<usize>)| range.start < hi && lo < range.end)
        {
            return Err(Error::Report(format!(
                "regimes '{other}' and '{}' overlap",
                r.name
            )));
        }
        out.push((r.name.clone(), lo..hi));
    }
    out.push((OVERALL.to_string(), 0..timestamps.len()));
    Ok(out)
}

/// `sqrt(mean(losses))`, summed left to right.
pub fn rmse<I: IntoIterator<Item = f64>>(losses: I) -> f64 {
    let (sum, n) = losses
        .into_iter()
        .fold((0.0, 0usize), |(s, n), l| (s + l, n + 1));
    (sum / n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeRmse {
    pub regime: String,
    /// Observations contributing to the value.
    pub days: usize,
    pub rmse: f64,
}

/// RMSE per regime slice of a per-step squared-loss series.
pub fn rmse_series(
    timestamps: &[Timestamp],
    losses: &[f64],
    warmup: &[bool],
    regimes: &[RegimeSpec],
    exclude_warmup: bool,
) -> Result<Vec<RegimeRmse>> {
    regime_slices(timestamps, regimes)?
        .into_iter()
        .map(|(regime, range)| {
            let kept: Vec<f64> = range
                .filter(|&i| !(exclude_warmup && warmup[i]))
                .map(|i| losses[i])
                .collect();
            if kept.is_empty() {
                return Err(Error::Report(format!(
                    "regime '{regime}' is empty after warm-up exclusion"
                )));
            }
            Ok(RegimeRmse {
                regime,
                days: kept.len(),
                rmse: rmse(kept),
            })
        })
        .collect()
}

/// Aggregate RMSE per regime, with the overall value last.
pub fn rmse_by_regime(
    records: &[RunRecord],
    regimes: &[RegimeSpec],
    exclude_warmup: bool,
) -> Result<Vec<RegimeRmse>> {
    let timestamps: Vec<Timestamp> = records.iter().map(|r| r.timestamp).collect();
    let losses: Vec<f64> = records.iter().map(RunRecord::squared_error).collect();
    let warmup: Vec<bool> = records.iter().map(|r| r.warmup).collect();
    rmse_series(&timestamps, &losses, &warmup, regimes, exclude_warmup)
}
