use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn memhedge(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memhedge"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MEMHEDGE_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"
variants = ["base_only", "combined"]

[input]
source = "csv"
path = "data.csv"

[pool.grid]
kind = "geometric"
h_min = 10.0
h_max = 500.0
k_finite = 5
include_static = true

[[regimes]]
name = "stable"
start = 0
end = 449

[[regimes]]
name = "shift"
start = 450
end = 749

[bootstrap]
replicates = 300
"#;

#[test]
fn synth_run_sweep_bootstrap_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = memhedge(
        &[
            "synth",
            "--preset",
            "level_shift",
            "--seed",
            "2",
            "-o",
            "data.csv",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fs::write(d.join("run.toml"), CONFIG).unwrap();

    let o = memhedge(&["run", "-c", "run.toml", "-o", "out"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("method,stable,shift,overall,overall_excl_warmup\n"));
    assert!(text.contains("delta base_only-combined [overall]"));
    for f in [
        "report.json",
        "report.csv",
        "bootstrap.csv",
        "losses.csv",
        "records_combined.csv",
    ] {
        assert!(d.join("out").join(f).is_file(), "{f}");
    }
    let first = fs::read(d.join("out/report.json")).unwrap();
    let o = memhedge(&["run", "-c", "out/resolved_config.toml", "-o", "again"], d);
    assert!(o.status.success());
    assert_eq!(first, fs::read(d.join("again/report.json")).unwrap());

    let o = memhedge(
        &[
            "sweep-gamma",
            "-c",
            "run.toml",
            "-o",
            "out",
            "--gamma",
            "0.9",
            "--gamma",
            "0.99",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = fs::read_to_string(d.join("out/sweep_gamma.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);

    let o = memhedge(
        &[
            "bootstrap",
            "-l",
            "out/losses.csv",
            "--regime",
            "stable=0..449",
            "--regime",
            "shift=450..749",
            "--replicates",
            "300",
            "--anchor",
            "combined",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        stdout(&o),
        fs::read_to_string(d.join("out/bootstrap.csv")).unwrap()
    );
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    memhedge(&["synth", "--preset", "level_shift", "-o", "data.csv"], d);
    fs::write(
        d.join("run.toml"),
        CONFIG.replace("replicates = 300", "replicates = 20"),
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_memhedge"))
        .args(["run", "-c", "run.toml"])
        .current_dir(d)
        .env("MEMHEDGE_OUTPUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.join("from-env/report.csv").is_file());
}

#[test]
fn grid_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = memhedge(
        &[
            "grid",
            "--h-min",
            "20",
            "--h-max",
            "5000",
            "-k",
            "15",
            "--with-static",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 16);
    assert!(rows[0].starts_with("1,0.95,"));
    assert_eq!(rows[15], "16,1,inf,0");
}

#[test]
fn errors_exit_nonzero_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = memhedge(&["run", "-c", "missing.toml"], d);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));

    fs::write(d.join("data.csv"), "timestamp,y,f1\n2,1,1\n1,1,1\n").unwrap();
    fs::write(
        d.join("run.toml"),
        "[input]\nsource = \"csv\"\npath = \"data.csv\"\n",
    )
    .unwrap();
    let o = memhedge(&["run", "-c", "run.toml", "-o", "out"], d);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("timestamp"), "{err}");

    let o = memhedge(&["grid", "--h-min", "1"], d);
    assert!(!o.status.success());
}
