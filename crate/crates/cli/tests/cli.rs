use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fracpoly(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpoly")).args(args).output().expect("binary runs")
}

/// Writes `job` into a fresh directory; returns the directory, the job path and the output path.
fn job(name: &str, job: &str) -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let path = dir.path().join(name);
    std::fs::write(&path, job).unwrap();
    (dir, path, out)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--output", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    fracpoly(&args)
}

const BM_MOMENTS: &str = r#"
[model]
kind = "brownian_motion"

[query]
kind = "moments"
polynomial = { "[2]" = 1.0 }
x0 = [0.0]

[grids]
t = [1.0]
alpha = [0.5, 1.0]

[output]
path = "unused.csv"
"#;

#[test]
fn moments_job_writes_csv() {
    let (_dir, cfg, out) = job("bm.toml", BM_MOMENTS);
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv, "t,alpha,value\n1,0.5,1.1283791671\n1,1,1\n");
}

// 2/√π printed to 12 significant digits, as the writer does.
#[allow(clippy::approx_constant)]
#[test]
fn json_config_and_json_output() {
    let cfg = r#"{
        "model": {"kind": "brownian_motion"},
        "query": {"kind": "moments", "polynomial": {"[2]": 1.0}, "x0": [0.0]},
        "grids": {"t": [1.0], "alpha": [0.5]},
        "output": {"path": "unused.json", "format": "json"}
    }"#;
    let (_dir, cfg, out) = job("bm.json", cfg);
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows, serde_json::json!([{"t": 1.0, "alpha": 0.5, "value": 1.1283791671}]));
}

#[test]
fn empty_grid_is_a_config_error_and_writes_nothing() {
    let (_dir, cfg, out) = job("bm.toml", &BM_MOMENTS.replace("t = [1.0]", "t = []"));
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grids.t"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_names_its_path() {
    let (_dir, cfg, out) =
        job("bm.toml", &BM_MOMENTS.replace("kind = \"brownian_motion\"", "kind = \"brownian_motion\"\ngamma = 2"));
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`model`") && err.contains("gamma"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = fracpoly(&["--config", "/nonexistent/job.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_stationary_correlation_is_a_numerical_error() {
    let cfg = r#"
[model]
kind = "pearson"
beta = 0.0
theta = 0.0
a0 = 1.0
a1 = 0.0
a2 = 0.0

[query]
kind = "correlation"

[grids]
s = [1.0]
t = [1.0]
alpha = [0.5]

[output]
path = "unused.csv"
"#;
    let (_dir, cfg, out) = job("c.toml", cfg);
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

/// An Euler step of 0.5 at mean-reversion speed 5 is unstable, so the
/// estimates are far from the closed form.
#[test]
fn failed_validation_exits_3_and_keeps_the_table() {
    let cfg = r#"
max_degree = 2

[model]
kind = "pearson"
beta = 5.0
theta = 0.0
a0 = 0.1
a1 = 0.0
a2 = 0.0

[query]
kind = "validate"
suites = ["moments"]
x0 = [1.0]

[grids]
t = [2.0]
alpha = [0.5]

[sim]
n_paths = 2000
dt_operational = 0.5
dt_subordinator = 1e-3
seed = 3

[output]
path = "unused.csv"
"#;
    let (_dir, cfg, out) = job("v.toml", cfg);
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("quantity,closed_form,estimate,std_error,z_score,pass_fail\n"));
    assert!(csv.contains(",fail\n"), "{csv}");
}

const SIMULATE: &str = r#"
[model]
kind = "pearson"
beta = 1.0
theta = 0.0
a0 = 1.0
a1 = 0.0
a2 = 0.0

[query]
kind = "simulate"
x0 = [0.0]

[grids]
t = [0.0, 0.5, 1.0]
alpha = [0.7]

[sim]
n_paths = 100
dt_operational = 1e-2
dt_subordinator = 1e-2
seed = 11

[output]
path = "unused.csv"
"#;

#[test]
fn seed_and_thread_count_fix_the_paths() {
    let (dir, cfg, out) = job("sim.toml", SIMULATE);
    let read = |extra: &[&str], name: &str| {
        let out = dir.path().join(name);
        let o = run(&cfg, &out, extra);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let base = read(&["--jobs", "1"], "a.csv");
    assert_eq!(base, read(&["--jobs", "3"], "b.csv"));
    assert_ne!(base, read(&["--seed", "12"], "c.csv"));
    let text = String::from_utf8(base).unwrap();
    assert!(text.starts_with("path,alpha,t,l,x1\n0,0.7,0,0,0\n"), "{text}");
    assert_eq!(text.lines().count(), 1 + 100 * 3);
    drop(out);
}
