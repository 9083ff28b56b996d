//! Benchmarks fitted with the whole sequence in view.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::engine::RunRecord;
use crate::error::{Error, Result};

/// Iteration cap for the static-combination solver.
pub const STATIC_MAX_ITER: usize = 100_000;
/// Gradient-mapping tolerance on the normalised objective.
pub const STATIC_TOL: f64 = 1e-8;

/// Cumulative squared loss of every expert column.
pub fn cumulative_expert_losses(records: &[RunRecord]) -> Vec<f64> {
    let n = records.first().map_or(0, |r| r.expert_preds.len());
    let mut out = vec![0.0; n];
    for r in records {
        for (acc, p) in out.iter_mut().zip(&r.expert_preds) {
            *acc += (p - r.y) * (p - r.y);
        }
    }
    out
}

/// Index (0-based) and value of the smallest loss; ties go to the smaller index.
pub fn hindsight_best_expert(losses: &[f64]) -> Option<(usize, f64)> {
    losses
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best, (i, l)| match best {
            Some((_, b)) if b <= l => best,
            _ => Some((i, l)),
        })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Row-wise `qᵀỹ_t`.
pub fn combine(preds: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    preds
        .iter()
        .map(|row| row.iter().zip(weights).map(|(p, w)| p * w).sum())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticFit {
    pub weights: Vec<f64>,
    /// `Σ_t (qᵀỹ_t − y_t)²`.
    pub loss: f64,
    /// Gradient-mapping norm of the normalised objective at `weights`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Best fixed convex combination of the expert columns in hindsight.
///
/// Accelerated projected gradient with adaptive restart on
/// `f(q) = Σ_t (qᵀỹ_t − y_t)² / (T·s²)` where `s²` is the larger of the mean
/// squared target and mean squared prediction, step `1/L` from the largest
/// eigenvalue of the normalised Gram matrix. Every few iterations the current
/// support is polished by an exact equality-constrained solve; either route
/// must meet [`STATIC_TOL`] on the gradient mapping to count as converged.
/// A run that exhausts [`STATIC_MAX_ITER`] returns its best iterate with
/// `converged = false`.
pub fn hindsight_static_convex(preds: &[Vec<f64>], targets: &[f64]) -> Result<StaticFit> {
    let t = preds.len();
    if t == 0 || t != targets.len() {
        return Err(Error::Dimension {
            context: "static convex combination",
            expected: targets.len().max(1),
            got: t,
        });
    }
    let n = preds[0].len();
    if n == 0 {
        return Err(Error::config(
            "static convex combination needs at least one expert",
        ));
    }
    if let Some(row) = preds.iter().find(|r| r.len() != n) {
        return Err(Error::Dimension {
            context: "static convex combination",
            expected: n,
            got: row.len(),
        });
    }
    let finish = |weights: Vec<f64>, residual: f64, iterations: usize, converged: bool| {
        let fitted = combine(preds, &weights);
        let loss = fitted
            .iter()
            .zip(targets)
            .map(|(f, y)| (f - y) * (f - y))
            .sum();
        StaticFit {
            weights,
            loss,
            residual,
            iterations,
            converged,
        }
    };
    if n == 1 {
        return Ok(finish(vec![1.0], 0.0, 0, true));
    }

    let scale = {
        let ms = targets.iter().map(|y| y * y).sum::<f64>() / t as f64;
        let mp = preds.iter().flatten().map(|p| p * p).sum::<f64>() / (t * n) as f64;
        let s = ms.max(mp);
        if s > 0.0 {
            t as f64 * s
        } else {
            t as f64
        }
    };
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut lin = DVector::<f64>::zeros(n);
    for (row, y) in preds.iter().zip(targets) {
        let x = DVector::from_column_slice(row);
        gram.ger(1.0 / scale, &x, &x, 1.0);
        lin.axpy(y / scale, &x, 1.0);
    }
    let yy = targets.iter().map(|y| y * y).sum::<f64>() / scale;
    let objective = |q: &DVector<f64>| q.dot(&(&gram * q)) - 2.0 * lin.dot(q) + yy;
    let gradient = |q: &DVector<f64>| (&gram * q - &lin) * 2.0;

    let lambda_max = SymmetricEigen::new(gram.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    if lambda_max.is_nan() || lambda_max <= 0.0 {
        // Every prediction is zero: the objective is constant on the simplex.
        return Ok(finish(vec![1.0 / n as f64; n], 0.0, 0, true));
    }
    let lip = 2.0 * lambda_max * (1.0 + 1e-12);
    let step = |q: &DVector<f64>| -> DVector<f64> {
        let g = gradient(q);
        DVector::from_vec(project_simplex((q - g / lip).as_slice()))
    };
    let mapping_norm = |q: &DVector<f64>| (q - step(q)).norm() * lip;

    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut v = x.clone();
    let mut momentum = 1.0f64;
    let mut f_x = objective(&x);
    let mut best = (x.clone(), f_x);
    for it in 1..=STATIC_MAX_ITER {
        let x_next = step(&v);
        let f_next = objective(&x_next);
        if f_next > f_x {
            // Restart momentum from the last accepted point.
            momentum = 1.0;
            v = x.clone();
            continue;
        }
        let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        v = &x_next + (&x_next - &x) * ((momentum - 1.0) / m_next);
        momentum = m_next;
        x = x_next;
        f_x = f_next;
        if f_x <= best.1 {
            best = (x.clone(), f_x);
        }
        let residual = mapping_norm(&x);
        if residual <= STATIC_TOL {
            return Ok(finish(x.as_slice().to_vec(), residual, it, true));
        }
        if it % POLISH_EVERY == 0 {
            if let Some(q) = polish_on_support(&gram, &lin, &x) {
                let residual = mapping_norm(&q);
                if residual <= STATIC_TOL && objective(&q) <= f_x {
                    return Ok(finish(q.as_slice().to_vec(), residual, it, true));
                }
            }
        }
    }
    let residual = mapping_norm(&best.0);
    Ok(finish(
        best.0.as_slice().to_vec(),
        residual,
        STATIC_MAX_ITER,
        false,
    ))
}

const POLISH_EVERY: usize = 50;

/// Exact minimiser of the quadratic on the face spanned by the support of
/// `x`, from the equality-constrained KKT system. `None` if it leaves the face.
fn polish_on_support(
    gram: &DMatrix<f64>,
    lin: &DVector<f64>,
    x: &DVector<f64>,
) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] > 0.0).collect();
    let s = support.len();
    let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
    let mut rhs = DVector::<f64>::zeros(s + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = 2.0 * gram[(i, j)];
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
        rhs[a] = 2.0 * lin[i];
    }
    rhs[s] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    let mut q = DVector::<f64>::zeros(x.len());
    for (a, &i) in support.iter().enumerate() {
        if sol[a].is_nan() || sol[a] < 0.0 {
            return None;
        }
        q[i] = sol[a];
    }
    let total = q.sum();
    Some(q / total)
}

/// Running sum of `(ŷ_t − y_t)² − (ref_t − y_t)²`.
pub fn cumulative_regret_curve(records: &[RunRecord], reference_preds: &[f64]) -> Result<Vec<f64>> {
    if records.len() != reference_preds.len() {
        return Err(Error::Dimension {
            context: "regret curve",
            expected: records.len(),
            got: reference_preds.len(),
        });
    }
    let mut acc = 0.0;
    Ok(records
        .iter()
        .zip(reference_preds)
        .map(|(r, p)| {
            acc += r.squared_error() - (p - r.y) * (p - r.y);
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestamp::Timestamp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn best_expert_ties_and_cases() {
        assert_eq!(hindsight_best_expert(&[4.0]), Some((0, 4.0)));
        assert_eq!(hindsight_best_expert(&[10.0, 3.0]), Some((1, 3.0)));
        assert_eq!(hindsight_best_expert(&[2.0, 1.0, 1.0]), Some((1, 1.0)));
        assert_eq!(hindsight_best_expert(&[]), None);
    }

    #[test]
    fn best_expert_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let losses: Vec<f64> = (0..rng.random_range(1..12))
                .map(|_| rng.random_range(0..5) as f64)
                .collect();
            let (i, l) = hindsight_best_expert(&losses).unwrap();
            for (j, lj) in losses.iter().enumerate() {
                assert!(l <= *lj);
                if j < i {
                    assert!(*lj > l);
                }
            }
        }
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = project_simplex(&[-3.0, 1.7, 0.1, 0.4]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12 && p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn single_column_fit() {
        let preds = vec![vec![1.0], vec![2.0]];
        let fit = hindsight_static_convex(&preds, &[0.0, 0.0]).unwrap();
        assert_eq!(fit.weights, vec![1.0]);
        assert_eq!(fit.loss, 5.0);
    }

    #[test]
    fn interpolating_expert_gets_all_weight() {
        let targets: Vec<f64> = (0..30).map(|t| (t as f64 * 0.3).sin()).collect();
        let preds: Vec<Vec<f64>> = targets
            .iter()
            .enumerate()
            .map(|(t, y)| vec![*y, 0.5 + 0.01 * t as f64])
            .collect();
        let fit = hindsight_static_convex(&preds, &targets).unwrap();
        assert!(fit.converged);
        assert!((fit.weights[0] - 1.0).abs() < 1e-6, "{:?}", fit.weights);
        assert!(fit.loss < 1e-10);
    }

    fn loss_at(preds: &[Vec<f64>], targets: &[f64], q: &[f64]) -> f64 {
        combine(preds, q)
            .iter()
            .zip(targets)
            .map(|(f, y)| (f - y) * (f - y))
            .sum()
    }

    #[test]
    fn matches_grid_search_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let targets: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            let preds: Vec<Vec<f64>> = targets
                .iter()
                .map(|y| {
                    (0..3)
                        .map(|j| y * (0.3 * j as f64) + rng.random_range(-0.8..0.8))
                        .collect()
                })
                .collect();
            let fit = hindsight_static_convex(&preds, &targets).unwrap();
            assert!(fit.converged);
            let mut grid_best = f64::INFINITY;
            let steps = 1000;
            for a in 0..=steps {
                for b in 0..=(steps - a) {
                    let q = [
                        a as f64 / steps as f64,
                        b as f64 / steps as f64,
                        (steps - a - b) as f64 / steps as f64,
                    ];
                    grid_best = grid_best.min(loss_at(&preds, &targets, &q));
                }
            }
            assert!(
                fit.loss <= grid_best + 1e-9,
                "{} vs {}",
                fit.loss,
                grid_best
            );
            assert!(grid_best - fit.loss < 1e-3 * grid_best.max(1.0));
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let targets: Vec<f64> = (0..200).map(|t| (t as f64 * 0.05).sin() * 100.0).collect();
        let preds: Vec<Vec<f64>> = targets
            .iter()
            .map(|y| {
                (0..8)
                    .map(|j| y * (1.0 - 0.1 * j as f64) + rng.random_range(-30.0..30.0) + j as f64)
                    .collect()
            })
            .collect();
        let fit = hindsight_static_convex(&preds, &targets).unwrap();
        assert!(
            fit.converged,
            "{} {} {:?}",
            fit.residual, fit.iterations, fit.weights
        );
        // gradient of Σ(qᵀx − y)² is 2Σ x (qᵀx − y)
        let fitted = combine(&preds, &fit.weights);
        let mut grad = [0.0; 8];
        for ((row, f), y) in preds.iter().zip(&fitted).zip(&targets) {
            for (g, x) in grad.iter_mut().zip(row) {
                *g += 2.0 * x * (f - y);
            }
        }
        let mu = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = grad.iter().map(|g| g.abs()).fold(0.0, f64::max).max(1.0);
        for (w, g) in fit.weights.iter().zip(&grad) {
            if *w > 1e-6 {
                assert!((g - mu).abs() < 1e-5 * scale, "active gradient {g} vs {mu}");
            }
        }
        for j in 0..8 {
            let mut e = vec![0.0; 8];
            e[j] = 1.0;
            assert!(fit.loss <= loss_at(&preds, &targets, &e) + 1e-9);
        }
        assert!(fit.loss <= loss_at(&preds, &targets, &[0.125; 8]) + 1e-9);
    }

    #[test]
    fn regret_curve_zero_against_itself() {
        let recs: Vec<RunRecord> = (0..5)
            .map(|i| RunRecord {
                timestamp: Timestamp::Index(i),
                expert_preds: vec![],
                agg_pred: i as f64,
                y: 1.0,
                weights: vec![],
                ewls_full_norms: vec![],
                ewls_slope_norms: vec![],
                warmup: false,
            })
            .collect();
        let own: Vec<f64> = recs.iter().map(|r| r.agg_pred).collect();
        assert!(cumulative_regret_curve(&recs, &own)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        let worse: Vec<f64> = own.iter().map(|p| p + 10.0).collect();
        let curve = cumulative_regret_curve(&recs, &worse).unwrap();
        assert!(curve.windows(2).all(|w| w[1] < w[0]));
        assert!(cumulative_regret_curve(&recs, &own[..3]).is_err());
    }
}
