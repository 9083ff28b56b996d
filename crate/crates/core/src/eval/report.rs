use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::diagnostics::{IterateNormSummary, ResidualCorrelation};
use super::metrics::{rmse_series, RegimeSpec};
use crate::error::Result;
use crate::timestamp::Timestamp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeLength {
    pub name: String,
    pub days: usize,
}

/// One table row: RMSE per regime (overall last) plus the warm-up-excluded overall value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub rmse: Vec<f64>,
    pub overall_excl_warmup: f64,
}

impl MethodRow {
    pub fn from_series(
        method: impl Into<String>,
        timestamps: &[Timestamp],
        losses: &[f64],
        warmup: &[bool],
        regimes: &[RegimeSpec],
    ) -> Result<(Self, Vec<RegimeLength>)> {
        let cells = rmse_series(timestamps, losses, warmup, regimes, false)?;
        let excl = rmse_series(timestamps, losses, warmup, &[], true)?;
        let lengths = cells
            .iter()
            .map(|c| RegimeLength {
                name: c.regime.clone(),
                days: c.days,
            })
            .collect();
        Ok((
            MethodRow {
                method: method.into(),
                rmse: cells.iter().map(|c| c.rmse).collect(),
                overall_excl_warmup: excl[0].rmse,
            },
            lengths,
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiRow {
    pub gamma: f64,
    pub h: f64,
    pub psi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiReport {
    pub c1: f64,
    pub c2: f64,
    pub path_length: f64,
    /// `None` encodes an infinite balancing scale (zero path length).
    pub balancing_scale: Option<f64>,
    pub rows: Vec<PsiRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeBuckets {
    pub regime: String,
    pub fast: f64,
    pub medium: f64,
    pub slow: f64,
    pub base: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub static_weights: Option<Vec<f64>>,
    pub static_converged: Option<bool>,
    /// Final cumulative excess loss over the static combination, per variant.
    pub regret_endpoints: BTreeMap<String, f64>,
    /// Mean bucket weight mass per regime for the combined variant.
    pub bucket_means: Vec<RegimeBuckets>,
    pub residual_correlation: Option<ResidualCorrelation>,
    pub iterate_norms: Vec<IterateNormSummary>,
    pub psi: Option<PsiReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub regimes: Vec<RegimeLength>,
    pub methods: Vec<MethodRow>,
    pub hindsight: Vec<MethodRow>,
    pub diagnostics: Diagnostics,
}

impl EvalReport {
    /// Flat table: one column per regime, then `overall` and `overall_excl_warmup`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method");
        for r in &self.regimes {
            write!(out, ",{}", r.name).unwrap();
        }
        out.push_str(",overall_excl_warmup\n");
        out.push_str("regime_length_days");
        for r in &self.regimes {
            write!(out, ",{}", r.days).unwrap();
        }
        out.push_str(",\n");
        for row in self.methods.iter().chain(&self.hindsight) {
            out.push_str(&row.method);
            for v in &row.rmse {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out, ",{}", row.overall_excl_warmup).unwrap();
        }
        out
    }
}
