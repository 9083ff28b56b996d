//! Closed-form tracking penalty and balancing scale for a single memory length.

use serde::{Deserialize, Serialize};

/// Assumption constants for one evaluation of the tracking penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiInputs {
    /// Ridge `δ`.
    pub delta: f64,
    /// Comparator radius `R`.
    pub r: f64,
    /// Loss-scale bound `D = B_y + B_z R`.
    pub d_bound: f64,
    /// Feature bound `B_z`.
    pub b_z: f64,
    /// Augmented dimension.
    pub d: f64,
    /// Horizon.
    pub t: f64,
    /// Nominal memory length.
    pub h: f64,
    /// Comparator path length.
    pub p: f64,
}

/// `δR² + D²d·log(1 + B_z²h/δ) + 2D²dT/h + 4R(δ + B_z²h)P`
pub fn psi_h(x: &PsiInputs) -> f64 {
    let d2 = x.d_bound * x.d_bound;
    let bz2 = x.b_z * x.b_z;
    x.delta * x.r * x.r
        + d2 * x.d * (bz2 * x.h / x.delta).ln_1p()
        + 2.0 * d2 * x.d * x.t / x.h
        + 4.0 * x.r * (x.delta + bz2 * x.h) * x.p
}

/// Constants of the `h`-dependent part `C₁dT/h + C₂hP`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiConstants {
    pub c1: f64,
    pub c2: f64,
}

impl PsiConstants {
    /// `C₁ = 2D²`, `C₂ = 8RB_z²`.
    pub fn from_inputs(x: &PsiInputs) -> Self {
        PsiConstants {
            c1: 2.0 * x.d_bound * x.d_bound,
            c2: 8.0 * x.r * x.b_z * x.b_z,
        }
    }
}

/// `C₁dT/h + C₂hP`.
pub fn tradeoff(h: f64, d: f64, t: f64, p: f64, c: PsiConstants) -> f64 {
    c.c1 * d * t / h + c.c2 * h * p
}

/// `h⋆ = √(C₁dT / (C₂P))`; `+∞` when `P = 0` (longest memory wins).
pub fn balancing_scale(d: f64, t: f64, p: f64, c: PsiConstants) -> f64 {
    if p <= 0.0 {
        f64::INFINITY
    } else {
        (c.c1 * d * t / (c.c2 * p)).sqrt()
    }
}

/// `Σ_{t≥2} ‖u_t − u_{t−1}‖₂`.
pub fn path_length(path: &[Vec<f64>]) -> f64 {
    path.windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_substitution() {
        let x = PsiInputs {
            delta: 1.0,
            r: 1.0,
            d_bound: 1.0,
            b_z: 1.0,
            d: 1.0,
            t: 100.0,
            h: 10.0,
            p: 1.0,
        };
        let expected = 1.0 + 11f64.ln() + 20.0 + 44.0;
        assert!((psi_h(&x) - expected).abs() < 1e-12);
        assert!((psi_h(&x) - 67.3978952728).abs() < 1e-9);
    }

    #[test]
    fn stationary_finite_memory_term_decreases_in_h() {
        let mut x = PsiInputs {
            delta: 1.0,
            r: 1.0,
            d_bound: 2.0,
            b_z: 1.0,
            d: 3.0,
            t: 1000.0,
            h: 10.0,
            p: 0.0,
        };
        let c = PsiConstants::from_inputs(&x);
        let a = tradeoff(10.0, x.d, x.t, 0.0, c);
        let b = tradeoff(1000.0, x.d, x.t, 0.0, c);
        assert!(b < a);
        assert!(balancing_scale(x.d, x.t, 0.0, c).is_infinite());
        // the non-log h-dependent term vanishes as h grows
        x.h = 1e12;
        let tail = 2.0 * 4.0 * 3.0 * 1000.0 / x.h;
        assert!(tail < 1e-7);
    }

    #[test]
    fn balancing_scale_minimises_tradeoff() {
        let c = PsiConstants { c1: 2.0, c2: 8.0 };
        let (d, t, p) = (5.0, 700.0, 0.3);
        let h = balancing_scale(d, t, p, c);
        let min = tradeoff(h, d, t, p, c);
        assert!((min - 2.0 * (c.c1 * c.c2 * d * t * p).sqrt()).abs() < 1e-9 * min);
        for f in [0.5, 0.9, 1.1, 2.0] {
            assert!(tradeoff(h * f, d, t, p, c) > min);
        }
    }

    #[test]
    fn path_lengths() {
        assert_eq!(path_length(&vec![vec![1.0, 2.0]; 5]), 0.0);
        assert_eq!(path_length(&[vec![0.0, 0.0], vec![3.0, 0.0]]), 3.0);
        assert_eq!(
            path_length(&[vec![0.0, 0.0], vec![3.0, 4.0], vec![3.0, 4.0]]),
            5.0
        );
        assert_eq!(path_length(&[]), 0.0);
    }
}
