use serde::{Deserialize, Serialize};

use crate::engine::{ExpertLabel, RunRecord};
use crate::error::{Error, Result};

/// Nominal-scale boundaries between fast, medium and slow EWLS experts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketEdges {
    pub fast_below: f64,
    pub slow_above: f64,
}

impl Default for BucketEdges {
    fn default() -> Self {
        BucketEdges {
            fast_below: 100.0,
            slow_above: 1000.0,
        }
    }
}

/// MLpol weight mass per expert family at one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketMass {
    /// `h < fast_below`
    pub fast: f64,
    /// `fast_below ≤ h ≤ slow_above`
    pub medium: f64,
    /// `h > slow_above`, including the static endpoint
    pub slow: f64,
    pub base: f64,
}

pub fn weight_buckets(
    records: &[RunRecord],
    experts: &[ExpertLabel],
    edges: BucketEdges,
) -> Vec<BucketMass> {
    records
        .iter()
        .map(|r| {
            let mut m = BucketMass::default();
            for (w, label) in r.weights.iter().zip(experts) {
                match label.nominal_scale() {
                    None => m.base += w,
                    Some(h) if h < edges.fast_below => m.fast += w,
                    Some(h) if h <= edges.slow_above => m.medium += w,
                    Some(_) => m.slow += w,
                }
            }
            m
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualCorrelation {
    pub segment_len: usize,
    pub matrix: Vec<Vec<f64>>,
    pub mean_offdiag: f64,
}

/// Pearson correlation of base residuals `z_{t,m} − y_t` over the first
/// `segment_len` rows, and the mean of its strictly off-diagonal entries.
pub fn residual_correlation(
    base_preds: &[Vec<f64>],
    targets: &[f64],
    segment_len: usize,
) -> Result<ResidualCorrelation> {
    if segment_len < 2 || segment_len > base_preds.len() || base_preds.len() != targets.len() {
        return Err(Error::Diagnostic(format!(
            "segment length {segment_len} must lie in [2, {}]",
            base_preds.len().min(targets.len())
        )));
    }
    let m = base_preds[0].len();
    if m < 2 {
        return Err(Error::Diagnostic(
            "residual correlation needs at least two base columns".into(),
        ));
    }
    let resid: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            (0..segment_len)
                .map(|t| base_preds[t][j] - targets[t])
                .collect()
        })
        .collect();
    let centered: Vec<Vec<f64>> = resid
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let mean = col.iter().sum::<f64>() / segment_len as f64;
            let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
            if c.iter().all(|v| *v == 0.0) {
                Err(Error::Diagnostic(format!(
                    "base column {} has zero residual variance",
                    j + 1
                )))
            } else {
                Ok(c)
            }
        })
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut matrix = vec![vec![1.0; m]; m];
    let mut off = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let dot: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            matrix[i][j] = r;
            matrix[j][i] = r;
            off += 2.0 * r;
        }
    }
    Ok(ResidualCorrelation {
        segment_len,
        matrix,
        mean_offdiag: off / (m * (m - 1)) as f64,
    })
}

/// Running suprema of the EWLS coefficient norms for one finite-memory expert.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateNormSummary {
    pub gamma: f64,
    pub h: f64,
    pub sup_full_norm: f64,
    pub sup_slope_norm: f64,
}

/// Bounded-iterate check over the finite-forgetting EWLS experts of a run.
/// The `γ = 1` endpoint is left out.
pub fn iterate_norm_summary(
    records: &[RunRecord],
    experts: &[ExpertLabel],
) -> Vec<IterateNormSummary> {
    let gammas: Vec<f64> = experts
        .iter()
        .filter_map(|e| match e {
            ExpertLabel::Ewls { gamma } => Some(*gamma),
            ExpertLabel::Base { .. } => None,
        })
        .collect();
    gammas
        .iter()
        .enumerate()
        .filter(|(_, g)| **g < 1.0)
        .map(|(k, g)| {
            let (full, slope) = records.iter().fold((0.0f64, 0.0f64), |(f, s), r| {
                (
                    f.max(r.ewls_full_norms.get(k).copied().unwrap_or(0.0)),
                    s.max(r.ewls_slope_norms.get(k).copied().unwrap_or(0.0)),
                )
            });
            IterateNormSummary {
                gamma: *g,
                h: 1.0 / (1.0 - g),
                sup_full_norm: full,
                sup_slope_norm: slope,
            }
        })
        .collect()
}
