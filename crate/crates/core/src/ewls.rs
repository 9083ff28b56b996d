//! Exponentially weighted least-squares correction expert.
//!
//! Each expert tracks a time-varying affine map from the augmented base
//! prediction vector `z̃ = (z, 1)` to the target. The coefficient at step `t`
//! minimises the discounted ridge objective
//!
//! ```text
//! Σ_{s<t} γ^{(t-1)-s} (y_s - wᵀz̃_s)² + γ^{t-1} δ ‖w‖²
//! ```
//!
//! and is maintained recursively as forgotten RLS on the covariance
//! `P = A⁻¹`, with an optional isotropic inflation `ε·I` added after every
//! update.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Default diffuse-prior scale: `P₀ = δ₀⁻¹·I`, equivalently ridge `δ = δ₀`.
pub const DEFAULT_DELTA0: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwlsConfig {
    /// Forgetting factor in `[0.5, 1]`.
    pub gamma: f64,
    /// Diffuse-prior scale (ridge strength).
    pub delta0: f64,
    /// Covariance inflation added after each update.
    pub epsilon: f64,
    /// Augmented dimension `M + 1`.
    pub dim: usize,
}

impl EwlsConfig {
    pub fn new(gamma: f64, delta0: f64, epsilon: f64, dim: usize) -> Result<Self> {
        let cfg = EwlsConfig {
            gamma,
            delta0,
            epsilon,
            dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!(
                "forgetting factor {} outside [0.5, 1]",
                self.gamma
            )));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::config(format!(
                "delta0 must be positive, got {}",
                self.delta0
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!(
                "inflation level must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.dim < 2 {
            return Err(Error::config(format!(
                "augmented dimension must be at least 2, got {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Nominal memory length `1/(1-γ)`; infinite at `γ = 1`.
    pub fn nominal_scale(&self) -> f64 {
        nominal_scale(self.gamma)
    }
}

pub fn nominal_scale(gamma: f64) -> f64 {
    if gamma >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (1.0 - gamma)
    }
}

/// Recursive state of one expert: coefficient `w` and covariance `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwlsState {
    w: DVector<f64>,
    p: DMatrix<f64>,
    steps_seen: usize,
}

impl EwlsState {
    /// Diffuse start: `w = 0`, `P = δ₀⁻¹ I`.
    pub fn new(cfg: &EwlsConfig) -> Self {
        EwlsState {
            w: DVector::zeros(cfg.dim),
            p: DMatrix::identity(cfg.dim, cfg.dim) / cfg.delta0,
            steps_seen: 0,
        }
    }

    /// State after observing `history` in one batch: the discounted ridge
    /// solution and the inverse of its discounted Gram matrix.
    pub fn from_batch(history: &[(Vec<f64>, f64)], cfg: &EwlsConfig) -> Result<Self> {
        let (w, gram) = discounted_system(history, cfg.gamma, cfg.delta0, cfg.dim)
            .and_then(|(gram, rhs)| solve_spd(&gram, &rhs).map(|w| (w, gram)))?;
        let p = gram
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| singular(history.len()))?;
        let mut state = EwlsState {
            w,
            p,
            steps_seen: history.len(),
        };
        symmetrize(&mut state.p);
        state.check_finite()?;
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn steps_seen(&self) -> usize {
        self.steps_seen
    }

    /// `z̃ᵀw` with the current (pre-update) coefficient.
    pub fn predict(&self, z_aug: &[f64]) -> Result<f64> {
        check_len("EWLS predict", self.dim(), z_aug.len())?;
        Ok(self.w.iter().zip(z_aug).map(|(w, z)| w * z).sum())
    }

    /// `z̃ᵀPz̃` under the current covariance.
    pub fn quadratic_form(&self, z_aug: &[f64]) -> Result<f64> {
        check_len("EWLS quadratic form", self.dim(), z_aug.len())?;
        let z = DVector::from_column_slice(z_aug);
        Ok(z.dot(&(&self.p * &z)))
    }

    /// One forgotten-RLS step with covariance inflation.
    pub fn update(&mut self, cfg: &EwlsConfig, z_aug: &[f64], y: f64) -> Result<()> {
        check_len("EWLS update", self.dim(), z_aug.len())?;
        let step = self.steps_seen + 1;
        if !y.is_finite() || z_aug.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step,
                expert: None,
                what: "non-finite input".into(),
            });
        }
        let z = DVector::from_column_slice(z_aug);
        let pz = &self.p * &z;
        let s = cfg.gamma + z.dot(&pz);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Numerical {
                step,
                expert: None,
                what: format!("innovation scale s = {s}"),
            });
        }
        let residual = y - z.dot(&self.w);
        self.w.axpy(residual / s, &pz, 1.0);

        // P ← γ⁻¹ (P − Pz̃z̃ᵀP / s) + εI
        self.p.ger(-1.0 / s, &pz, &pz, 1.0);
        self.p /= cfg.gamma;
        if cfg.epsilon > 0.0 {
            for i in 0..self.p.nrows() {
                self.p[(i, i)] += cfg.epsilon;
            }
        }
        symmetrize(&mut self.p);
        self.steps_seen = step;
        self.check_finite()
    }

    /// `(‖w‖₂, ‖w without the intercept‖₂)`, intercept being the last coordinate.
    pub fn coefficient_norms(&self) -> (f64, f64) {
        coefficient_norms(self.w.as_slice())
    }

    fn check_finite(&self) -> Result<()> {
        if self.w.iter().chain(self.p.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical {
                step: self.steps_seen,
                expert: None,
                what: "non-finite EWLS state".into(),
            })
        }
    }
}

pub fn coefficient_norms(w: &[f64]) -> (f64, f64) {
    let full = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let slope = match w.split_last() {
        Some((_, slope)) => slope.iter().map(|v| v * v).sum::<f64>().sqrt(),
        None => 0.0,
    };
    (full, slope)
}

/// Direct solve of the discounted ridge problem over `history`.
///
/// The returned coefficient is the one an expert would use to predict the
/// step after the last entry of `history`.
pub fn batch_ewls_oracle(
    history: &[(Vec<f64>, f64)],
    gamma: f64,
    delta0: f64,
) -> Result<DVector<f64>> {
    let dim = history
        .first()
        .map(|(z, _)| z.len())
        .ok_or_else(|| Error::config("batch EWLS needs a non-empty history"))?;
    let (gram, rhs) = discounted_system(history, gamma, delta0, dim)?;
    solve_spd(&gram, &rhs)
}

/// Discounted Gram matrix `γ^n δ I + Σ γ^{n-s} z̃z̃ᵀ` and right-hand side `Σ γ^{n-s} y z̃`.
fn discounted_system(
    history: &[(Vec<f64>, f64)],
    gamma: f64,
    delta0: f64,
    dim: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = history.len();
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (s, (z, y)) in history.iter().enumerate() {
        check_len("batch EWLS history", dim, z.len())?;
        let weight = gamma.powi((n - 1 - s) as i32);
        let z = DVector::from_column_slice(z);
        gram.ger(weight, &z, &z, 1.0);
        rhs.axpy(weight * y, &z, 1.0);
    }
    let ridge = gamma.powi(n as i32) * delta0;
    for i in 0..dim {
        gram[(i, i)] += ridge;
    }
    Ok((gram, rhs))
}

fn solve_spd(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let w = match gram.clone().cholesky() {
        Some(chol) => chol.solve(rhs),
        None => gram.clone().lu().solve(rhs).ok_or_else(|| singular(0))?,
    };
    if w.iter().all(|v| v.is_finite()) {
        Ok(w)
    } else {
        Err(singular(0))
    }
}

fn singular(step: usize) -> Error {
    Error::Numerical {
        step,
        expert: None,
        what: "discounted Gram matrix is numerically singular".into(),
    }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}
