//! Experiment orchestration: config file, full evaluation run, γ sweep.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{paired_bootstrap, BootstrapConfig, BootstrapReport, LossTable};
use crate::engine::{run_variant, Observation, RunOutput, RunRecord, Variant};
use crate::error::{Error, Result};
use crate::eval::{
    balancing_scale, cumulative_regret_curve, hindsight_best_expert, hindsight_static_convex,
    iterate_norm_summary, path_length, psi_h, regime_slices, residual_correlation, rmse_series,
    weight_buckets, BucketEdges, Diagnostics, EvalReport, MethodRow, PsiConstants, PsiInputs,
    PsiReport, PsiRow, RegimeBuckets, RegimeSpec,
};
use crate::ewls::{nominal_scale, DEFAULT_DELTA0};
use crate::io::{self, ColumnMap};
use crate::pool::{EwlsGrid, GridSpec, PoolConfig, DEFAULT_EPSILON0};
use crate::synthetic::{drift_scenario, generate, level_shift_scenario, ScenarioSpec};
use crate::timestamp::Timestamp;

/// Environment variable consulted when no output directory is configured.
pub const OUTPUT_DIR_ENV: &str = "MEMHEDGE_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "memhedge-out";
pub const RESIDUAL_SEGMENT_DEFAULT: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    LevelShift,
    Drift,
}

impl Preset {
    pub fn spec(self, seed: u64) -> ScenarioSpec {
        match self {
            Preset::LevelShift => level_shift_scenario(seed),
            Preset::Drift => drift_scenario(seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Csv {
        path: PathBuf,
        #[serde(default)]
        columns: ColumnMap,
    },
    Synthetic(ScenarioSpec),
    Preset {
        preset: Preset,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSettings {
    pub grid: EwlsGrid,
    pub delta0: f64,
    pub epsilon0: f64,
    pub alpha: f64,
    pub clip_radius: Option<f64>,
    /// `M + 5` when absent.
    pub coldstart_len: Option<usize>,
}

impl Default for PoolSettings {
    fn default() -> Self {
        PoolSettings {
            grid: EwlsGrid::Geometric(GridSpec::new(20.0, 5000.0, 15, true)),
            delta0: DEFAULT_DELTA0,
            epsilon0: DEFAULT_EPSILON0,
            alpha: 1.0,
            clip_radius: None,
            coldstart_len: None,
        }
    }
}

impl PoolSettings {
    pub fn pool_config(&self, m_base: usize) -> Result<PoolConfig> {
        let mut cfg = PoolConfig::new(m_base, self.grid.clone());
        cfg.delta0 = self.delta0;
        cfg.epsilon0 = self.epsilon0;
        cfg.alpha = self.alpha;
        cfg.clip_radius = self.clip_radius;
        if let Some(n) = self.coldstart_len {
            cfg.coldstart_len = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Assumption constants for the Ψ_h table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiSettings {
    pub delta: f64,
    pub r: f64,
    pub d_bound: f64,
    pub b_z: f64,
    /// Comparator path length; taken from the generator for synthetic input.
    pub path_length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub weight_buckets: bool,
    pub bucket_edges: BucketEdges,
    pub residual_correlation: bool,
    /// Leading rows used for the residual correlation; 300 capped at T when absent.
    pub residual_segment_len: Option<usize>,
    pub iterate_norms: bool,
    pub psi: Option<PsiSettings>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            weight_buckets: true,
            bucket_edges: BucketEdges::default(),
            residual_correlation: true,
            residual_segment_len: None,
            iterate_norms: true,
            psi: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Forgetting factors to run alone; the pool grid when absent.
    pub gammas: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub pool: PoolSettings,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub regimes: Vec<RegimeSpec>,
    pub bootstrap: Option<BootstrapConfig>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

impl RunConfig {
    pub fn new(input: InputSpec) -> Self {
        RunConfig {
            input,
            pool: PoolSettings::default(),
            variants: all_variants(),
            regimes: Vec::new(),
            bootstrap: None,
            output_dir: None,
            diagnostics: DiagnosticsConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Parse a config file; a relative CSV path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let InputSpec::Csv { path: data, .. } = &mut cfg.input {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Configured directory, else the environment variable, else a fixed default.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

/// Stream loaded from a config's input section.
#[derive(Clone, Debug)]
pub struct LoadedInput {
    pub base_names: Vec<String>,
    pub stream: Vec<Observation>,
    pub comparator_path: Option<Vec<Vec<f64>>>,
    /// The input with presets expanded and paths made absolute.
    pub resolved: InputSpec,
}

pub fn load_input(input: &InputSpec) -> Result<LoadedInput> {
    match input {
        InputSpec::Csv { path, columns } => {
            let ing = io::ingest_csv(path, columns)?;
            let abs = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
            Ok(LoadedInput {
                base_names: ing.base_names,
                stream: ing.stream,
                comparator_path: None,
                resolved: InputSpec::Csv {
                    path: abs,
                    columns: columns.clone(),
                },
            })
        }
        InputSpec::Synthetic(spec) => {
            let sc = generate(spec)?;
            Ok(LoadedInput {
                base_names: io::base_names(spec.m_base),
                stream: sc.stream,
                comparator_path: Some(sc.comparator_path),
                resolved: input.clone(),
            })
        }
        InputSpec::Preset { preset, seed } => load_input(&InputSpec::Synthetic(preset.spec(*seed))),
    }
}

fn check_regimes(regimes: &[RegimeSpec], stream: &[Observation]) -> Result<()> {
    let (Some(first), Some(last)) = (stream.first(), stream.last()) else {
        return Err(Error::config("input stream is empty"));
    };
    for r in regimes {
        for t in [r.start, r.end] {
            if !t.same_kind(&first.timestamp) {
                return Err(Error::config(format!(
                    "regime '{}' uses timestamp {t}, which is not the same kind as the data",
                    r.name
                )));
            }
        }
        if r.start < first.timestamp || r.end > last.timestamp {
            return Err(Error::config(format!(
                "regime '{}' [{}, {}] lies outside the data range [{}, {}]",
                r.name, r.start, r.end, first.timestamp, last.timestamp
            )));
        }
    }
    Ok(())
}

/// Everything a run produced, besides the files.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub resolved: RunConfig,
    pub report: EvalReport,
    pub bootstrap: Option<BootstrapReport>,
    pub runs: Vec<RunOutput>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        io::write_atomic(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

fn run_all(
    stream: &[Observation],
    pool: &PoolConfig,
    variants: &[Variant],
    out: &mut Writer,
) -> Result<Vec<RunOutput>> {
    let results: Vec<_> = variants
        .par_iter()
        .map(|&v| (v, run_variant(stream, pool, v)))
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    for (v, res) in results {
        match res {
            Ok(run) => runs.push(run),
            Err(e) => {
                out.put(&format!("records_{v}.csv"), io::records_csv(&e.records))?;
                return Err(Error::Diagnostic(format!(
                    "variant {v} aborted after {} steps: {}",
                    e.records.len(),
                    e.source
                )));
            }
        }
    }
    Ok(runs)
}

fn losses(records: &[RunRecord]) -> Vec<f64> {
    records.iter().map(RunRecord::squared_error).collect()
}

fn column_losses(records: &[RunRecord], j: usize) -> Vec<f64> {
    records
        .iter()
        .map(|r| (r.expert_preds[j] - r.y).powi(2))
        .collect()
}

pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutcome> {
    if config.variants.is_empty() {
        return Err(Error::config("no variants selected"));
    }
    let input = load_input(&config.input)?;
    let stream = &input.stream;
    let m = input.base_names.len();
    check_regimes(&config.regimes, stream)?;
    let pool = config.pool.pool_config(m)?;
    let k = pool.ewls_configs()?.len();
    if k == 0 && config.variants.contains(&Variant::EwlsOnly) {
        return Err(Error::config("ewls_only requires a non-empty EWLS grid"));
    }

    let mut resolved = config.clone();
    resolved.input = input.resolved.clone();
    resolved.output_dir = None;
    resolved.pool.coldstart_len = Some(pool.coldstart_len);
    resolved.diagnostics.residual_segment_len = Some(
        config
            .diagnostics
            .residual_segment_len
            .unwrap_or(RESIDUAL_SEGMENT_DEFAULT)
            .min(stream.len()),
    );
    if let Some(b) = &mut resolved.bootstrap {
        if b.anchor.is_none() && config.variants.contains(&Variant::Combined) {
            b.anchor = Some(Variant::Combined.to_string());
        }
    }

    let output_dir = config.output_dir();
    let mut out = Writer {
        dir: output_dir.clone(),
        files: Vec::new(),
    };
    out.put("resolved_config.toml", resolved.to_toml()?)?;

    let mut runs = run_all(stream, &pool, &config.variants, &mut out)?;
    // The full pool is needed for hindsight benchmarks even when combined was not requested.
    let full_variant = if k == 0 {
        Variant::BaseOnly
    } else {
        Variant::Combined
    };
    let full = match runs.iter().find(|r| r.variant == full_variant) {
        Some(r) => r.clone(),
        None => run_variant(stream, &pool, full_variant).map_err(Error::from)?,
    };

    for run in &runs {
        out.put(
            &format!("records_{}.csv", run.variant),
            io::records_csv(&run.records),
        )?;
    }

    let timestamps: Vec<Timestamp> = stream.iter().map(|o| o.timestamp).collect();
    let warmup: Vec<bool> = full.records.iter().map(|r| r.warmup).collect();
    let table = LossTable {
        timestamps: timestamps.clone(),
        methods: runs
            .iter()
            .map(|r| (r.variant.to_string(), losses(&r.records)))
            .collect(),
    };
    out.put("losses.csv", io::loss_table_csv(&table))?;

    let mut regimes_len = Vec::new();
    let mut methods = Vec::new();
    for (name, l) in &table.methods {
        let (row, lens) =
            MethodRow::from_series(name.as_str(), &timestamps, l, &warmup, &config.regimes)?;
        regimes_len = lens;
        methods.push(row);
    }

    let mut hindsight = Vec::new();
    let cumulative: Vec<f64> = (0..full.experts.len())
        .map(|j| column_losses(&full.records, j).iter().sum())
        .collect();
    if let Some((j, _)) = hindsight_best_expert(&cumulative[..m]) {
        let (row, _) = MethodRow::from_series(
            format!("best_base_hindsight[{}]", input.base_names[j]),
            &timestamps,
            &column_losses(&full.records, j),
            &warmup,
            &config.regimes,
        )?;
        hindsight.push(row);
    }
    if let Some((j, _)) = hindsight_best_expert(&cumulative[m..]) {
        let (row, _) = MethodRow::from_series(
            format!("best_ewls_hindsight[{}]", full.experts[m + j]),
            &timestamps,
            &column_losses(&full.records, m + j),
            &warmup,
            &config.regimes,
        )?;
        hindsight.push(row);
    }
    let pred_rows: Vec<Vec<f64>> = full
        .records
        .iter()
        .map(|r| r.expert_preds.clone())
        .collect();
    let targets: Vec<f64> = stream.iter().map(|o| o.y).collect();
    let fit = hindsight_static_convex(&pred_rows, &targets)?;
    let static_preds = crate::eval::combine(&pred_rows, &fit.weights);
    let static_losses: Vec<f64> = static_preds
        .iter()
        .zip(&targets)
        .map(|(p, y)| (p - y).powi(2))
        .collect();
    let (row, _) = MethodRow::from_series(
        "static_convex_hindsight",
        &timestamps,
        &static_losses,
        &warmup,
        &config.regimes,
    )?;
    hindsight.push(row);

    let mut diagnostics = Diagnostics {
        static_weights: Some(fit.weights.clone()),
        static_converged: Some(fit.converged),
        ..Diagnostics::default()
    };

    let mut regret_series = Vec::new();
    for run in &runs {
        let curve = cumulative_regret_curve(&run.records, &static_preds)?;
        diagnostics
            .regret_endpoints
            .insert(run.variant.to_string(), *curve.last().unwrap_or(&0.0));
        regret_series.push((run.variant.to_string(), curve));
    }
    out.put(
        "regret.csv",
        io::tidy_csv(
            regret_series
                .iter()
                .map(|(n, v)| (n.as_str(), v.as_slice())),
        ),
    )?;

    let diag = &config.diagnostics;
    if diag.weight_buckets && k > 0 {
        let buckets = weight_buckets(&full.records, &full.experts, diag.bucket_edges);
        let cols: [(&str, Vec<f64>); 4] = [
            ("fast", buckets.iter().map(|b| b.fast).collect()),
            ("medium", buckets.iter().map(|b| b.medium).collect()),
            ("slow", buckets.iter().map(|b| b.slow).collect()),
            ("base", buckets.iter().map(|b| b.base).collect()),
        ];
        out.put(
            "weight_buckets.csv",
            io::tidy_csv(cols.iter().map(|(n, v)| (*n, v.as_slice()))),
        )?;
        for (regime, range) in regime_slices(&timestamps, &config.regimes)? {
            let n = range.len() as f64;
            let mean = |f: fn(&crate::eval::BucketMass) -> f64| {
                buckets[range.clone()].iter().map(f).sum::<f64>() / n
            };
            diagnostics.bucket_means.push(RegimeBuckets {
                regime,
                fast: mean(|b| b.fast),
                medium: mean(|b| b.medium),
                slow: mean(|b| b.slow),
                base: mean(|b| b.base),
            });
        }
    }
    if diag.residual_correlation && m >= 2 {
        let seg = resolved
            .diagnostics
            .residual_segment_len
            .expect("resolved above");
        let base_rows: Vec<Vec<f64>> = stream.iter().map(|o| o.z.clone()).collect();
        diagnostics.residual_correlation = Some(residual_correlation(&base_rows, &targets, seg)?);
    }
    if diag.iterate_norms && k > 0 {
        diagnostics.iterate_norms = iterate_norm_summary(&full.records, &full.experts);
        let mut series = Vec::new();
        for (i, label) in full.experts[m..].iter().enumerate() {
            series.push((
                format!("full:{label}"),
                full.records
                    .iter()
                    .map(|r| r.ewls_full_norms[i])
                    .collect::<Vec<_>>(),
            ));
            series.push((
                format!("slope:{label}"),
                full.records.iter().map(|r| r.ewls_slope_norms[i]).collect(),
            ));
        }
        out.put(
            "iterate_norms.csv",
            io::tidy_csv(series.iter().map(|(n, v)| (n.as_str(), v.as_slice()))),
        )?;
    }
    if let Some(psi) = &diag.psi {
        let p = match (psi.path_length, &input.comparator_path) {
            (Some(p), _) => p,
            (None, Some(path)) => path_length(path),
            (None, None) => {
                return Err(Error::config(
                    "psi diagnostics need a path_length for non-synthetic input",
                ));
            }
        };
        let base = PsiInputs {
            delta: psi.delta,
            r: psi.r,
            d_bound: psi.d_bound,
            b_z: psi.b_z,
            d: (m + 1) as f64,
            t: stream.len() as f64,
            h: 1.0,
            p,
        };
        let c = PsiConstants::from_inputs(&base);
        let rows = pool
            .ewls_configs()?
            .iter()
            .filter(|e| e.gamma < 1.0)
            .map(|e| {
                let h = nominal_scale(e.gamma);
                PsiRow {
                    gamma: e.gamma,
                    h,
                    psi: psi_h(&PsiInputs { h, ..base }),
                }
            })
            .collect();
        let hs = balancing_scale(base.d, base.t, p, c);
        diagnostics.psi = Some(PsiReport {
            c1: c.c1,
            c2: c.c2,
            path_length: p,
            balancing_scale: hs.is_finite().then_some(hs),
            rows,
        });
    }

    let report = EvalReport {
        regimes: regimes_len,
        methods,
        hindsight,
        diagnostics,
    };
    out.put("report.json", serde_json::to_string_pretty(&report)? + "\n")?;
    out.put("report.csv", report.to_csv())?;

    let bootstrap = match &resolved.bootstrap {
        Some(b) => {
            let rep = paired_bootstrap(&table, &config.regimes, b)?;
            out.put("bootstrap.json", serde_json::to_string_pretty(&rep)? + "\n")?;
            out.put("bootstrap.csv", rep.to_csv())?;
            Some(rep)
        }
        None => None,
    };

    runs.sort_by_key(|r| config.variants.iter().position(|v| *v == r.variant));
    Ok(ExperimentOutcome {
        output_dir,
        files: out.files,
        resolved,
        report,
        bootstrap,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub h: f64,
    pub regime: String,
    pub rmse: f64,
    /// RMSE minus the best RMSE in the same regime.
    pub excess: f64,
    pub is_best: bool,
}

/// Standalone single-γ EWLS runs, one table row per (γ, regime).
pub fn gamma_sweep(config: &RunConfig) -> Result<Vec<SweepRow>> {
    let input = load_input(&config.input)?;
    check_regimes(&config.regimes, &input.stream)?;
    let gammas = match &config.sweep.gammas {
        Some(g) => g.clone(),
        None => config.pool.grid.gammas()?,
    };
    if gammas.is_empty() {
        return Err(Error::config(
            "the sweep needs at least one forgetting factor",
        ));
    }
    let base = config.pool.pool_config(input.base_names.len())?;
    let timestamps: Vec<Timestamp> = input.stream.iter().map(|o| o.timestamp).collect();
    let cells: Vec<Vec<(String, f64)>> = gammas
        .par_iter()
        .map(|&gamma| -> Result<Vec<(String, f64)>> {
            let mut pool = base.clone();
            pool.grid = EwlsGrid::Fixed {
                gammas: vec![gamma],
            };
            let run = run_variant(&input.stream, &pool, Variant::EwlsOnly)?;
            let warm: Vec<bool> = run.records.iter().map(|r| r.warmup).collect();
            Ok(rmse_series(
                &timestamps,
                &losses(&run.records),
                &warm,
                &config.regimes,
                false,
            )?
            .into_iter()
            .map(|c| (c.regime, c.rmse))
            .collect())
        })
        .collect::<Result<_>>()?;
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for per_gamma in &cells {
        for (regime, v) in per_gamma {
            let b = best.entry(regime.as_str()).or_insert(f64::INFINITY);
            *b = b.min(*v);
        }
    }
    let mut rows = Vec::new();
    for (per_gamma, &gamma) in cells.iter().zip(&gammas) {
        for (regime, v) in per_gamma {
            let b = best[regime.as_str()];
            rows.push(SweepRow {
                gamma,
                h: nominal_scale(gamma),
                regime: regime.clone(),
                rmse: *v,
                excess: v - b,
                is_best: *v == b,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("gamma,h,regime,rmse,excess,is_best\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.gamma, r.h, r.regime, r.rmse, r.excess, r.is_best
        )
        .unwrap();
    }
    out
}

/// Per-regime argmin of the sweep: `(regime, gamma, h)` in table order, first minimum on ties.
pub fn sweep_argmin(rows: &[SweepRow]) -> Vec<(String, f64, f64)> {
    let mut out: Vec<(String, f64, f64)> = Vec::new();
    for r in rows {
        if !out.iter().any(|(n, _, _)| *n == r.regime) {
            out.push((r.regime.clone(), f64::NAN, f64::NAN));
        }
    }
    for slot in &mut out {
        if let Some(r) = rows.iter().find(|r| r.is_best && r.regime == slot.0) {
            slot.1 = r.gamma;
            slot.2 = r.h;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let mut spec = level_shift_scenario(3);
        spec.t = 120;
        spec.segments[0].len = 80;
        spec.segments[1].len = 40;
        let mut cfg = RunConfig::new(InputSpec::Synthetic(spec));
        cfg.pool.grid = EwlsGrid::Geometric(GridSpec::new(5.0, 200.0, 4, true));
        cfg.regimes = vec![
            RegimeSpec::new("stable", Timestamp::Index(0), Timestamp::Index(79)),
            RegimeSpec::new("shift", Timestamp::Index(80), Timestamp::Index(119)),
        ];
        cfg
    }

    #[test]
    fn config_toml_round_trip() {
        let mut cfg = small_config();
        cfg.bootstrap = Some(BootstrapConfig::default());
        cfg.diagnostics.psi = Some(PsiSettings {
            delta: 1.0,
            r: 1.0,
            d_bound: 1.0,
            b_z: 1.0,
            path_length: None,
        });
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_toml() {
        let cfg = RunConfig::from_toml("[input]\nsource = \"preset\"\npreset = \"level_shift\"\n")
            .unwrap();
        assert_eq!(cfg.variants, Variant::ALL.to_vec());
        assert!(RunConfig::from_toml(
            "[input]\nsource = \"preset\"\npreset = \"level_shift\"\nbogus = 1\n"
        )
        .is_err());
    }

    #[test]
    fn regimes_outside_data_rejected() {
        let mut cfg = small_config();
        cfg.regimes.push(RegimeSpec::new(
            "late",
            Timestamp::Index(120),
            Timestamp::Index(130),
        ));
        let dir = tempfile::tempdir().unwrap();
        cfg.output_dir = Some(dir.path().into());
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn single_gamma_sweep_has_zero_excess() {
        let mut cfg = small_config();
        cfg.sweep.gammas = Some(vec![0.95]);
        let rows = gamma_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.excess == 0.0 && r.is_best));
    }

    #[test]
    fn experiment_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config();
        cfg.output_dir = Some(dir.path().into());
        cfg.bootstrap = Some(BootstrapConfig {
            replicates: 50,
            block_len_default: 5,
            ..BootstrapConfig::default()
        });
        let outcome = run_experiment(&cfg).unwrap();
        for name in [
            "resolved_config.toml",
            "records_base_only.csv",
            "records_ewls_only.csv",
            "records_combined.csv",
            "losses.csv",
            "report.json",
            "report.csv",
            "bootstrap.json",
            "bootstrap.csv",
            "regret.csv",
            "weight_buckets.csv",
            "iterate_norms.csv",
        ] {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
        assert_eq!(outcome.report.methods.len(), 3);
        assert_eq!(outcome.report.hindsight.len(), 3);
        let anchor = outcome.resolved.bootstrap.as_ref().unwrap().anchor.clone();
        assert_eq!(anchor.as_deref(), Some("combined"));
    }
}
