//! Independent reference computations shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use memhedge::engine::Observation;
use memhedge::Timestamp;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Augmented regression history `(z̃, y)` with Gaussian features and a noisy linear target.
pub fn regression_history(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> Vec<(Vec<f64>, f64)> {
    let truth: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    (0..len)
        .map(|_| {
            let mut z: Vec<f64> = (0..dim - 1).map(|_| normal(rng)).collect();
            z.push(1.0);
            let y = z.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.1 * normal(rng);
            (z, y)
        })
        .collect()
}

/// Discounted ridge solution written as a stacked least-squares problem and
/// solved by SVD: rows `√(γ^{n−s}) z̃_s` plus `√(γⁿδ) e_i` regularization rows.
pub fn stacked_ls_oracle(history: &[(Vec<f64>, f64)], gamma: f64, delta0: f64) -> DVector<f64> {
    let n = history.len();
    let d = history[0].0.len();
    let mut a = DMatrix::zeros(n + d, d);
    let mut b = DVector::zeros(n + d);
    for (s, (z, y)) in history.iter().enumerate() {
        let w = gamma.powi((n - 1 - s) as i32).sqrt();
        for (j, v) in z.iter().enumerate() {
            a[(s, j)] = w * v;
        }
        b[s] = w * y;
    }
    let reg = (gamma.powi(n as i32) * delta0).sqrt();
    for i in 0..d {
        a[(n + i, i)] = reg;
    }
    a.svd(true, true).solve(&b, 0.0).expect("svd solve")
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff: f64 = got
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

/// Quantile by selection on an unsorted copy, interpolating at `q(n−1)`.
pub fn naive_percentile(samples: &[f64], q: f64) -> f64 {
    let pos = q * (samples.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let pick = |k: usize| {
        let mut v = samples.to_vec();
        *v.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).unwrap())
            .1
    };
    let (a, b) = (pick(lo), pick(hi));
    a + (pos - lo as f64) * (b - a)
}

/// Exact `P(position p of a moving-block resample holds index i)` by
/// enumerating every tuple of block starts.
pub fn exact_block_marginals(len: usize, block: usize) -> Vec<Vec<f64>> {
    let starts = len - block + 1;
    let blocks = len.div_ceil(block);
    let total = starts.pow(blocks as u32);
    let mut counts = vec![vec![0usize; len]; len];
    for code in 0..total {
        let mut c = code;
        let mut seq = Vec::with_capacity(blocks * block);
        for _ in 0..blocks {
            let s = c % starts;
            c /= starts;
            seq.extend(s..s + block);
        }
        for (p, &i) in seq.iter().take(len).enumerate() {
            counts[p][i] += 1;
        }
    }
    counts
        .into_iter()
        .map(|row| row.into_iter().map(|n| n as f64 / total as f64).collect())
        .collect()
}

/// Stream with uniform base predictions in `[-scale, scale]` and targets in `[-b, b]`.
pub fn bounded_stream(
    rng: &mut ChaCha8Rng,
    m: usize,
    len: usize,
    b: f64,
    scale: f64,
) -> Vec<Observation> {
    let mut level = 0.0f64;
    (0..len)
        .map(|t| {
            if rng.random_bool(0.01) {
                level = rng.random_range(-0.5 * b..=0.5 * b);
            }
            let y = (level + 0.3 * b * normal(rng)).clamp(-b, b);
            let z = (0..m).map(|_| rng.random_range(-scale..=scale)).collect();
            Observation {
                timestamp: Timestamp::Index(t as i64),
                y,
                z,
            }
        })
        .collect()
}

/// Base predictions that track a drifting target with noise.
pub fn tracking_stream(rng: &mut ChaCha8Rng, m: usize, len: usize) -> Vec<Observation> {
    let mut level = 1.0;
    (0..len)
        .map(|t| {
            level += 0.01 * normal(rng);
            let y = level + 0.05 * normal(rng);
            let z = (0..m)
                .map(|j| level + 0.05 * j as f64 + 0.1 * normal(rng))
                .collect();
            Observation {
                timestamp: Timestamp::Index(t as i64),
                y,
                z,
            }
        })
        .collect()
}
