//! MLpol aggregation under squared loss.
//!
//! Weights are proportional to the positive parts of the cumulative
//! pseudo-regrets `R_j = Σ_s 2(ŷ_s − y_s)(ŷ_s − ỹ_{s,j})`, with the uniform
//! distribution whenever every positive part vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpolState {
    regrets: Vec<f64>,
    weights: Vec<f64>,
    steps: usize,
}

impl MlpolState {
    /// Fresh state over `n` experts: zero regrets and uniform weights.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("MLpol needs at least one expert"));
        }
        Ok(MlpolState {
            regrets: vec![0.0; n],
            weights: vec![1.0 / n as f64; n],
            steps: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn regrets(&self) -> &[f64] {
        &self.regrets
    }

    /// Current simplex weights (copy).
    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    pub fn weights_ref(&self) -> &[f64] {
        &self.weights
    }

    /// `pᵀỹ` with the current weights.
    pub fn aggregate(&self, expert_preds: &[f64]) -> Result<f64> {
        check_len("MLpol aggregate", self.len(), expert_preds.len())?;
        Ok(self
            .weights
            .iter()
            .zip(expert_preds)
            .map(|(p, y)| p * y)
            .sum())
    }

    /// Reveal `y`, accumulate pseudo-regrets and recompute the weights.
    ///
    /// `agg_pred` must be the value [`aggregate`](Self::aggregate) returned for
    /// the same `expert_preds`. Returns this step's pseudo-regret increments.
    pub fn observe(&mut self, expert_preds: &[f64], agg_pred: f64, y: f64) -> Result<Vec<f64>> {
        check_len("MLpol observe", self.len(), expert_preds.len())?;
        let step = self.steps + 1;
        if !agg_pred.is_finite() || !y.is_finite() || expert_preds.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step,
                expert: None,
                what: "non-finite MLpol input".into(),
            });
        }
        let g = 2.0 * (agg_pred - y);
        let increments: Vec<f64> = expert_preds.iter().map(|p| g * (agg_pred - p)).collect();
        for (r, inc) in self.regrets.iter_mut().zip(&increments) {
            *r += inc;
        }
        self.steps = step;
        self.recompute_weights();
        Ok(increments)
    }

    fn recompute_weights(&mut self) {
        let total: f64 = self.regrets.iter().map(|r| r.max(0.0)).sum();
        if total > 0.0 && total.is_finite() {
            for (w, r) in self.weights.iter_mut().zip(&self.regrets) {
                *w = r.max(0.0) / total;
            }
        } else {
            let u = 1.0 / self.weights.len() as f64;
            self.weights.iter_mut().for_each(|w| *w = u);
        }
    }
}
