//! The candidate pool: raw base forecasts followed by EWLS correction experts
//! on a geometric grid of memory lengths.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::ewls::{nominal_scale, EwlsConfig, EwlsState, DEFAULT_DELTA0};

/// Default inflation scale `ε₀`.
pub const DEFAULT_EPSILON0: f64 = 1e-8;

/// Geometric grid in nominal memory length `h = 1/(1-γ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h_min: f64,
    pub h_max: f64,
    /// Number of finite-memory points.
    pub k_finite: usize,
    /// Append the no-forgetting endpoint `γ = 1`.
    #[serde(default)]
    pub include_static: bool,
}

impl GridSpec {
    pub fn new(h_min: f64, h_max: f64, k_finite: usize, include_static: bool) -> Self {
        GridSpec {
            h_min,
            h_max,
            k_finite,
            include_static,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_min.is_finite() && self.h_max.is_finite()) {
            return Err(Error::config("grid bounds must be finite"));
        }
        if self.h_min < 2.0 {
            return Err(Error::config(format!(
                "h_min = {} is below 2 (forgetting factor below 1/2)",
                self.h_min
            )));
        }
        if self.h_max <= self.h_min {
            return Err(Error::config(format!(
                "h_max = {} must exceed h_min = {}",
                self.h_max, self.h_min
            )));
        }
        if self.k_finite == 0 {
            return Err(Error::config("grid needs at least one finite point"));
        }
        Ok(())
    }

    /// Ratio between adjacent nominal scales. A single-point grid covers the
    /// whole range with ratio `h_max / h_min`.
    pub fn ratio(&self) -> f64 {
        if self.k_finite == 1 {
            self.h_max / self.h_min
        } else {
            (self.h_max / self.h_min).powf(1.0 / (self.k_finite - 1) as f64)
        }
    }

    /// The finite nominal scales `h₁ < … < h_K`.
    pub fn nominal_scales(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let rho = self.ratio();
        let k = self.k_finite;
        Ok((0..k)
            .map(|i| {
                if k > 1 && i == k - 1 {
                    self.h_max
                } else {
                    self.h_min * rho.powi(i as i32)
                }
            })
            .collect())
    }
}

/// Forgetting factors of the grid, ascending, with `1.0` appended when the
/// static endpoint is requested.
pub fn build_grid(spec: &GridSpec) -> Result<Vec<f64>> {
    let mut gammas: Vec<f64> = spec
        .nominal_scales()?
        .into_iter()
        .map(|h| 1.0 - 1.0 / h)
        .collect();
    if spec.include_static {
        gammas.push(1.0);
    }
    Ok(gammas)
}

/// Nearest finite grid point to `h_star` in log distance, and the ratio
/// `max(h_k/h⋆, h⋆/h_k)`. The static endpoint never participates.
pub fn grid_covers(spec: &GridSpec, h_star: f64) -> Result<(usize, f64)> {
    let scales = spec.nominal_scales()?;
    if !(h_star >= spec.h_min && h_star <= spec.h_max) {
        return Err(Error::OutOfRange {
            value: h_star,
            lo: spec.h_min,
            hi: spec.h_max,
        });
    }
    let (idx, gap) = scales
        .iter()
        .enumerate()
        .map(|(i, h)| (i, (h / h_star).ln().abs()))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        );
    Ok((idx, gap.exp()))
}

/// Clip `a` to `[-b, b]`.
pub fn clip(a: f64, b: f64) -> f64 {
    a.clamp(-b, b)
}

/// Which forgetting factors the EWLS layer uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EwlsGrid {
    /// No EWLS experts (`K = 0`).
    #[default]
    Off,
    Geometric(GridSpec),
    Fixed {
        gammas: Vec<f64>,
    },
}

impl EwlsGrid {
    pub fn gammas(&self) -> Result<Vec<f64>> {
        match self {
            EwlsGrid::Off => Ok(Vec::new()),
            EwlsGrid::Geometric(spec) => build_grid(spec),
            EwlsGrid::Fixed { gammas } => {
                if let Some(g) = gammas.iter().find(|g| !(0.5..=1.0).contains(*g)) {
                    return Err(Error::config(format!(
                        "forgetting factor {g} outside [0.5, 1]"
                    )));
                }
                Ok(gammas.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    /// Number of base forecasters `M`.
    pub m_base: usize,
    pub grid: EwlsGrid,
    pub delta0: f64,
    pub epsilon0: f64,
    /// Inflation schedule exponent.
    pub alpha: f64,
    /// Clipping radius; `None` disables clipping.
    pub clip_radius: Option<f64>,
    pub coldstart_len: usize,
}

impl PoolConfig {
    /// Defaults: `δ₀ = 1e-3`, `ε₀ = 1e-8`, `α = 1`, no clipping, cold start `M + 5`.
    pub fn new(m_base: usize, grid: EwlsGrid) -> Self {
        PoolConfig {
            m_base,
            grid,
            delta0: DEFAULT_DELTA0,
            epsilon0: DEFAULT_EPSILON0,
            alpha: 1.0,
            clip_radius: None,
            coldstart_len: m_base + 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_base == 0 {
            return Err(Error::config(
                "the base pool must contain at least one forecaster",
            ));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::config(format!(
                "delta0 must be positive, got {}",
                self.delta0
            )));
        }
        if !(self.epsilon0 >= 0.0 && self.epsilon0.is_finite()) {
            return Err(Error::config(format!(
                "epsilon0 must be nonnegative, got {}",
                self.epsilon0
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::config("alpha must be finite"));
        }
        if let Some(b) = self.clip_radius {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::config(format!(
                    "clip radius must be positive, got {b}"
                )));
            }
        }
        if self.coldstart_len == 0 {
            return Err(Error::config("cold-start length must be positive"));
        }
        self.grid.gammas().map(|_| ())
    }

    /// Inflation level `ε₀(1-γ)^α`, exactly zero at `γ = 1`.
    pub fn inflation(&self, gamma: f64) -> f64 {
        if gamma >= 1.0 {
            0.0
        } else {
            self.epsilon0 * (1.0 - gamma).powf(self.alpha)
        }
    }

    pub fn ewls_configs(&self) -> Result<Vec<EwlsConfig>> {
        self.grid
            .gammas()?
            .into_iter()
            .map(|g| EwlsConfig::new(g, self.delta0, self.inflation(g), self.m_base + 1))
            .collect()
    }
}

/// Raw base forecasters plus EWLS experts, with the cold-start buffer.
#[derive(Clone, Debug)]
pub struct ExpertPool {
    config: PoolConfig,
    experts: Vec<EwlsConfig>,
    states: Vec<EwlsState>,
    buffer: Vec<(Vec<f64>, f64)>,
    step: usize,
}

impl ExpertPool {
    pub fn new(config: PoolConfig) -> Result<Self> {
        config.validate()?;
        let experts = config.ewls_configs()?;
        let states = experts.iter().map(EwlsState::new).collect();
        Ok(ExpertPool {
            buffer: Vec::with_capacity(config.coldstart_len),
            config,
            experts,
            states,
            step: 0,
        })
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    pub fn m(&self) -> usize {
        self.config.m_base
    }

    pub fn k(&self) -> usize {
        self.experts.len()
    }

    pub fn n(&self) -> usize {
        self.m() + self.k()
    }

    pub fn experts(&self) -> &[EwlsConfig] {
        &self.experts
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.experts.iter().map(|e| e.gamma).collect()
    }

    pub fn nominal_scales(&self) -> Vec<f64> {
        self.experts
            .iter()
            .map(|e| nominal_scale(e.gamma))
            .collect()
    }

    pub fn states(&self) -> &[EwlsState] {
        &self.states
    }

    /// Observations consumed so far.
    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn in_cold_start(&self) -> bool {
        self.step < self.config.coldstart_len
    }

    /// All `N` candidate predictions for the next step.
    pub fn predict(&self, base_preds: &[f64]) -> Result<Vec<f64>> {
        check_len("pool predict", self.m(), base_preds.len())?;
        let mut out = Vec::with_capacity(self.n());
        out.extend_from_slice(base_preds);
        if self.in_cold_start() {
            let mean = base_preds.iter().sum::<f64>() / self.m() as f64;
            out.extend(std::iter::repeat_n(mean, self.k()));
        } else {
            let z = augment(base_preds);
            for state in &self.states {
                out.push(state.predict(&z)?);
            }
        }
        if let Some(b) = self.config.clip_radius {
            out.iter_mut().for_each(|v| *v = clip(*v, b));
        }
        Ok(out)
    }

    /// Reveal the target for the step just predicted.
    pub fn update(&mut self, base_preds: &[f64], y: f64) -> Result<()> {
        check_len("pool update", self.m(), base_preds.len())?;
        let z = augment(base_preds);
        if self.in_cold_start() {
            self.buffer.push((z, y));
            self.step += 1;
            if self.step == self.config.coldstart_len {
                for (k, cfg) in self.experts.iter().enumerate() {
                    self.states[k] = EwlsState::from_batch(&self.buffer, cfg)
                        .map_err(|e| with_step(e, self.step, k))?;
                }
                self.buffer.clear();
            }
            return Ok(());
        }
        self.step += 1;
        for (k, (state, cfg)) in self.states.iter_mut().zip(&self.experts).enumerate() {
            state
                .update(cfg, &z, y)
                .map_err(|e| with_step(e, self.step, k))?;
        }
        Ok(())
    }
}

fn with_step(e: Error, step: usize, k: usize) -> Error {
    match e {
        Error::Numerical { what, .. } => Error::Numerical {
            step,
            expert: Some(k),
            what,
        },
        other => other.with_expert(k),
    }
}

/// `z̃ = (z, 1)`.
pub fn augment(base_preds: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(base_preds.len() + 1);
    z.extend_from_slice(base_preds);
    z.push(1.0);
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ewls::batch_ewls_oracle;
    use approx::assert_relative_eq;

    #[test]
    fn reported_grid() {
        let g = build_grid(&GridSpec::new(20.0, 5000.0, 15, true)).unwrap();
        assert_eq!(g.len(), 16);
        assert_relative_eq!(g[0], 0.95, epsilon = 1e-15);
        assert_relative_eq!(g[14], 0.9998, epsilon = 1e-15);
        assert_eq!(g[15], 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn three_point_grid() {
        let g = build_grid(&GridSpec::new(10.0, 1000.0, 3, false)).unwrap();
        let expected = [0.9, 0.99, 0.999];
        for (a, b) in g.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(build_grid(&GridSpec::new(2.0, 2.0, 2, false)).is_err());
        assert!(build_grid(&GridSpec::new(1.5, 20.0, 2, false)).is_err());
        assert!(build_grid(&GridSpec::new(10.0, 20.0, 0, false)).is_err());
        assert!(build_grid(&GridSpec::new(2.0, 20.0, 2, false)).is_ok());
    }

    #[test]
    fn geometric_spacing() {
        let spec = GridSpec::new(20.0, 5000.0, 15, false);
        let h = spec.nominal_scales().unwrap();
        let slope = spec.ratio().ln();
        for (k, hk) in h.iter().enumerate() {
            assert!((hk.ln() - (20f64.ln() + k as f64 * slope)).abs() < 1e-9);
        }
    }

    #[test]
    fn coverage_examples() {
        let spec = GridSpec::new(10.0, 1000.0, 3, false);
        let (i, gap) = grid_covers(&spec, 100.0).unwrap();
        assert_eq!(i, 1);
        assert_relative_eq!(gap, 1.0, epsilon = 1e-12);
        let (_, gap) = grid_covers(&spec, 10f64.powf(1.5)).unwrap();
        assert_relative_eq!(gap, 10f64.sqrt(), max_relative = 1e-12);
        assert!(gap <= spec.ratio());
        assert!(matches!(
            grid_covers(&spec, 5.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(grid_covers(&spec, 1001.0).is_err());
    }

    #[test]
    fn inflation_schedule() {
        let mut cfg = PoolConfig::new(
            3,
            EwlsGrid::Geometric(GridSpec::new(20.0, 5000.0, 15, true)),
        );
        cfg.epsilon0 = 1e-8;
        for e in cfg.ewls_configs().unwrap() {
            if e.gamma < 1.0 {
                assert_relative_eq!(e.epsilon * e.nominal_scale(), 1e-8, max_relative = 1e-15);
            } else {
                assert_eq!(e.epsilon, 0.0);
            }
        }
        cfg.alpha = 0.0;
        assert_eq!(cfg.inflation(1.0), 0.0);
    }

    #[test]
    fn clip_cases() {
        assert_eq!(clip(150.0, 100.0), 100.0);
        assert_eq!(clip(-7.0, 100.0), -7.0);
        assert_eq!(clip(-150.0, 100.0), -100.0);
    }

    #[test]
    fn rejects_empty_base_pool() {
        assert!(ExpertPool::new(PoolConfig::new(0, EwlsGrid::Off)).is_err());
        let p = ExpertPool::new(PoolConfig::new(1, EwlsGrid::Fixed { gammas: vec![0.9] })).unwrap();
        assert_eq!(p.n(), 2);
    }

    #[test]
    fn cold_start_outputs_base_mean() {
        let cfg = PoolConfig::new(
            2,
            EwlsGrid::Fixed {
                gammas: vec![0.9, 0.99],
            },
        );
        let pool = ExpertPool::new(cfg).unwrap();
        assert_eq!(pool.predict(&[1.0, 3.0]).unwrap(), vec![1.0, 3.0, 2.0, 2.0]);
        assert!(pool.predict(&[1.0]).is_err());
    }

    #[test]
    fn cold_start_entries_are_clipped() {
        let mut cfg = PoolConfig::new(2, EwlsGrid::Fixed { gammas: vec![0.9] });
        cfg.clip_radius = Some(1.5);
        let pool = ExpertPool::new(cfg).unwrap();
        assert_eq!(pool.predict(&[1.0, 3.0]).unwrap(), vec![1.0, 1.5, 1.5]);
    }

    fn run_coldstart(targets: impl Fn(usize) -> f64) -> (ExpertPool, Vec<(Vec<f64>, f64)>) {
        let mut cfg = PoolConfig::new(
            2,
            EwlsGrid::Fixed {
                gammas: vec![0.8, 0.95, 1.0],
            },
        );
        cfg.epsilon0 = 0.0;
        let mut pool = ExpertPool::new(cfg).unwrap();
        let mut buf = Vec::new();
        for t in 0..7 {
            let z = [(t as f64).sin(), (0.7 * t as f64).cos()];
            let y = targets(t);
            pool.predict(&z).unwrap();
            pool.update(&z, y).unwrap();
            buf.push((augment(&z), y));
        }
        (pool, buf)
    }

    #[test]
    fn batch_initialisation_after_cold_start() {
        let (pool, buf) = run_coldstart(|t| 0.3 * t as f64 - 1.0);
        assert!(!pool.in_cold_start());
        for (state, cfg) in pool.states().iter().zip(pool.experts()) {
            let oracle = batch_ewls_oracle(&buf, cfg.gamma, cfg.delta0).unwrap();
            for i in 0..3 {
                assert_relative_eq!(state.coefficients()[i], oracle[i], max_relative = 1e-12);
            }
        }
        let z = [0.2, -0.4];
        let preds = pool.predict(&z).unwrap();
        for (k, state) in pool.states().iter().enumerate() {
            assert_eq!(preds[2 + k], state.predict(&augment(&z)).unwrap());
        }
    }

    #[test]
    fn zero_targets_give_zero_coefficients() {
        let (pool, _) = run_coldstart(|_| 0.0);
        for s in pool.states() {
            assert!(s.coefficients().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn static_expert_tracks_undiscounted_ridge() {
        let mut cfg = PoolConfig::new(2, EwlsGrid::Fixed { gammas: vec![1.0] });
        cfg.epsilon0 = 1.0;
        let mut pool = ExpertPool::new(cfg).unwrap();
        let mut buf = Vec::new();
        for t in 0..40 {
            let z = [(t as f64 * 0.31).sin(), (t as f64 * 0.17).cos()];
            let y = 1.0 + 0.5 * z[0] - z[1] + 0.01 * (t as f64 * 1.3).sin();
            pool.predict(&z).unwrap();
            pool.update(&z, y).unwrap();
            buf.push((augment(&z), y));
        }
        let oracle = batch_ewls_oracle(&buf, 1.0, 1e-3).unwrap();
        for i in 0..3 {
            assert_relative_eq!(
                pool.states()[0].coefficients()[i],
                oracle[i],
                max_relative = 1e-8
            );
        }
    }
}
