use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use memhedge::bootstrap::{paired_bootstrap, BootstrapConfig};
use memhedge::eval::{rte_regimes, RegimeSpec};
use memhedge::experiment::{
    gamma_sweep, load_input, run_experiment, sweep_argmin, sweep_csv, InputSpec, Preset, RunConfig,
    OUTPUT_DIR_ENV,
};
use memhedge::io;
use memhedge::pool::{build_grid, EwlsGrid};
use memhedge::synthetic::ScenarioSpec;
use memhedge::{GridSpec, PoolConfig, Timestamp, Variant};

#[derive(Parser)]
#[command(
    name = "memhedge",
    version,
    about = "Multi-scale EWLS correction experts aggregated online with MLpol"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run(RunArgs),
    /// Run each forgetting factor alone and tabulate per-regime RMSE.
    SweepGamma(SweepArgs),
    /// Paired moving-block bootstrap over a saved loss table.
    Bootstrap(BootstrapArgs),
    /// Emit a synthetic scenario in ingestion CSV format.
    Synth(SynthArgs),
    /// Print the γ / h / inflation table of a geometric grid.
    Grid(GridArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the config; falls back to $MEMHEDGE_OUTPUT_DIR when neither is set.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Restrict to these variants (repeatable).
    #[arg(long = "variant")]
    variants: Vec<Variant>,
    #[arg(long)]
    clip_radius: Option<f64>,
    #[arg(long)]
    coldstart_len: Option<usize>,
    /// Use the built-in pre-lockdown / lockdown / post-lockdown calendar.
    #[arg(long)]
    rte_regimes: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if self.output_dir.is_some() {
            cfg.output_dir = self.output_dir.clone();
        }
        if !self.variants.is_empty() {
            cfg.variants = self.variants.clone();
        }
        if self.clip_radius.is_some() {
            cfg.pool.clip_radius = self.clip_radius;
        }
        if self.coldstart_len.is_some() {
            cfg.pool.coldstart_len = self.coldstart_len;
        }
        if self.rte_regimes {
            cfg.regimes = rte_regimes();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Enable the bootstrap with this many replicates.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    bootstrap_seed: Option<u64>,
    #[arg(long, conflicts_with_all = ["replicates", "bootstrap_seed"])]
    no_bootstrap: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Forgetting factors to sweep (repeatable); defaults to the config.
    #[arg(long = "gamma")]
    gammas: Vec<f64>,
}

#[derive(Args)]
struct BootstrapArgs {
    /// CSV with a timestamp column and one squared-loss column per method.
    #[arg(short, long)]
    losses: PathBuf,
    /// Regime as NAME=START..END with inclusive bounds (repeatable).
    #[arg(long = "regime", value_parser = parse_regime)]
    regimes: Vec<RegimeSpec>,
    /// Use the built-in pre-lockdown / lockdown / post-lockdown calendar.
    #[arg(long, conflicts_with = "regimes")]
    rte_regimes: bool,
    #[arg(long, default_value_t = 10_000)]
    replicates: usize,
    /// Default block length.
    #[arg(long, default_value_t = 14)]
    block: usize,
    /// Per-regime block length as NAME=LEN (repeatable); lockdown=7 unless overridden.
    #[arg(long = "block-for", value_parser = parse_block)]
    block_for: Vec<(String, usize)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Method the others are compared against; the first column by default.
    #[arg(long)]
    anchor: Option<String>,
    #[arg(short, long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = parse_preset, conflicts_with = "scenario", required_unless_present = "scenario")]
    preset: Option<Preset>,
    /// Scenario description (TOML).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 20.0)]
    h_min: f64,
    #[arg(long, default_value_t = 5000.0)]
    h_max: f64,
    /// Number of finite-memory factors.
    #[arg(short, long, default_value_t = 15)]
    k: usize,
    /// Append the γ = 1 endpoint.
    #[arg(long)]
    with_static: bool,
    #[arg(long, default_value_t = memhedge::pool::DEFAULT_EPSILON0)]
    epsilon0: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

fn parse_regime(s: &str) -> Result<RegimeSpec, String> {
    let (name, range) = s.split_once('=').ok_or("expected NAME=START..END")?;
    let (start, end) = range.split_once("..").ok_or("expected START..END")?;
    let start: Timestamp = start.parse().map_err(|e| format!("{e}"))?;
    let end: Timestamp = end.parse().map_err(|e| format!("{e}"))?;
    Ok(RegimeSpec::new(name, start, end))
}

fn parse_block(s: &str) -> Result<(String, usize), String> {
    let (name, len) = s.split_once('=').ok_or("expected NAME=LEN")?;
    Ok((name.to_string(), len.parse().map_err(|e| format!("{e}"))?))
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    match s {
        "level_shift" | "level-shift" => Ok(Preset::LevelShift),
        "drift" => Ok(Preset::Drift),
        _ => Err(format!("unknown preset '{s}' (level_shift, drift)")),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    if args.no_bootstrap {
        cfg.bootstrap = None;
    } else if args.replicates.is_some() || args.bootstrap_seed.is_some() {
        let b = cfg.bootstrap.get_or_insert_with(BootstrapConfig::default);
        if let Some(r) = args.replicates {
            b.replicates = r;
        }
        if let Some(s) = args.bootstrap_seed {
            b.seed = s;
        }
    }
    let outcome = run_experiment(&cfg)?;
    print!("{}", outcome.report.to_csv());
    if let Some(b) = &outcome.bootstrap {
        for c in &b.comparisons {
            println!(
                "delta {}-{} [{}]: {:.6} ({:.6}, {:.6}){}",
                c.method,
                c.anchor,
                c.regime,
                c.delta.point,
                c.delta.lo,
                c.delta.hi,
                if c.significant { " *" } else { "" }
            );
        }
    }
    eprintln!(
        "wrote {} files to {}",
        outcome.files.len(),
        outcome.output_dir.display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    if !args.gammas.is_empty() {
        cfg.sweep.gammas = Some(args.gammas);
    }
    let rows = gamma_sweep(&cfg)?;
    let path = cfg.output_dir().join("sweep_gamma.csv");
    io::write_atomic(&path, sweep_csv(&rows))?;
    for (regime, gamma, h) in sweep_argmin(&rows) {
        println!("{regime}: best gamma {gamma} (h = {h})");
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_bootstrap(args: BootstrapArgs) -> Result<()> {
    let table = io::read_loss_table_file(&args.losses)?;
    let regimes = if args.rte_regimes {
        rte_regimes()
    } else {
        args.regimes
    };
    let mut overrides = BootstrapConfig::default().block_len_overrides;
    overrides.extend(args.block_for);
    let cfg = BootstrapConfig {
        replicates: args.replicates,
        block_len_default: args.block,
        block_len_overrides: overrides.into_iter().collect::<BTreeMap<_, _>>(),
        seed: args.seed,
        confidence: args.confidence,
        anchor: args.anchor,
    };
    let report = paired_bootstrap(&table, &regimes, &cfg)?;
    let csv = report.to_csv();
    if let Some(dir) = args.output_dir {
        io::write_atomic(
            &dir.join("bootstrap.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
        io::write_atomic(&dir.join("bootstrap.csv"), &csv)?;
        eprintln!(
            "wrote bootstrap.json and bootstrap.csv to {}",
            dir.display()
        );
    }
    print!("{csv}");
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec: ScenarioSpec = match (&args.preset, &args.scenario) {
        (Some(p), _) => p.spec(args.seed),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, None) => bail!("either --preset or --scenario is required"),
    };
    let input = load_input(&InputSpec::Synthetic(spec))?;
    let csv = io::emit_observations(&input.stream, &input.base_names);
    match args.output {
        Some(path) => io::write_atomic(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    let spec = GridSpec::new(args.h_min, args.h_max, args.k, args.with_static);
    let gammas = build_grid(&spec)?;
    let mut pool = PoolConfig::new(1, EwlsGrid::Geometric(spec.clone()));
    pool.epsilon0 = args.epsilon0;
    pool.alpha = args.alpha;
    let mut out = format!("# ratio {}\nindex,gamma,h,epsilon\n", spec.ratio());
    for (i, g) in gammas.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            g,
            memhedge::ewls::nominal_scale(*g),
            pool.inflation(*g)
        )?;
    }
    print!("{out}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::SweepGamma(a) => cmd_sweep(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
