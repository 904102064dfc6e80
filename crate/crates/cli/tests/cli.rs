use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pxaug(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pxaug"));
    cmd.args(args).env_remove("PXAUG_OUT_DIR");
    if let Some(d) = env_out {
        cmd.env("PXAUG_OUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const R_MEASURE: &str = r#"
seed = 1
[model]
kind = "two_stage_normal"
n1 = 1
n2 = 1
sigma = 1.0
[hypotheses]
theta0 = 0.0
theta1 = 1.0
"#;

#[test]
fn r_measure_reports_the_analytic_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.toml", R_MEASURE);
    let out = pxaug(&["r-measure", "--config", cfg.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let get = |k: &str| v[k].as_f64().unwrap();
    assert!((get("marginal_bound") - (-0.125f64).exp()).abs() < 1e-7);
    assert!((get("expanded_bound") - (-0.25f64).exp()).abs() < 1e-7);
    assert!((get("r_measure") - 0.1036961).abs() < 1e-7);
    assert_eq!(v["strict"], Value::Bool(true));
}

#[test]
fn writes_results_manifest_and_reproduces_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.toml",
        r#"
seed = 77
format = "csv"
[model]
kind = "normal_location"
sigma = 1.0
[hypotheses]
theta0 = 0.0
theta1 = 1.0
[monte_carlo]
replicates = 4000
theta1_list = [0.5, 1.0, 2.0]
"#,
    );
    let res = dir.path().join("out").join("sweep.csv");
    let out = pxaug(
        &["mc-sweep", "--config", cfg.to_str().unwrap(), "--out", res.to_str().unwrap()],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&res).unwrap();
    assert_eq!(text.lines().count(), 4);
    let plot = std::fs::read_to_string(dir.path().join("out/sweep.plot.csv")).unwrap();
    assert!(plot.starts_with("theta1,error_sum,bound\n"));

    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/sweep.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "mc-sweep");
    assert_eq!(manifest["seed"], 77);
    assert!(manifest["wall_time_ms"].is_u64());

    // the embedded config alone regenerates the same bytes
    let replay = write_config(dir.path(), "replay.toml", manifest["config"].as_str().unwrap());
    let res2 = dir.path().join("replay.csv");
    let out = pxaug(
        &["mc-sweep", "--config", replay.to_str().unwrap(), "--out", res2.to_str().unwrap()],
        None,
    );
    assert!(out.status.success());
    assert_eq!(std::fs::read(&res).unwrap(), std::fs::read(&res2).unwrap());
}

#[test]
fn singleton_sweep_matches_test_run() {
    let dir = tempfile::tempdir().unwrap();
    let body = |extra: &str| {
        format!(
            r#"
seed = 5
[model]
kind = "two_stage_normal"
n1 = 1
n2 = 1
sigma = 1.0
[hypotheses]
theta0 = 0.0
theta1 = 1.0
[monte_carlo]
replicates = 3000
test = "psi"
{extra}
"#
        )
    };
    let t = write_config(dir.path(), "t.toml", &body(""));
    let s = write_config(dir.path(), "s.toml", &body("theta1_list = [1.0]"));
    let a = pxaug(&["test", "--config", t.to_str().unwrap()], None);
    let b = pxaug(&["mc-sweep", "--config", s.to_str().unwrap()], None);
    assert!(a.status.success() && b.status.success());
    let a: Value = serde_json::from_slice(&a.stdout).unwrap();
    let b: Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(a["rows"], b["rows"]);
}

#[test]
fn test_with_observation_decides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.toml",
        &format!("{R_MEASURE}[observation]\nt1 = 0.9\nt2 = 0.2\n"),
    );
    let out = pxaug(&["test", "--config", cfg.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["phi_reject_h0"], Value::Bool(true));
    assert!(v["psi_log_ratio"].is_f64());
}

#[test]
fn missing_field_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", "[model]\nkind = \"normal_location\"\n");
    let out = pxaug(&["bound", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));

    let cfg = write_config(dir.path(), "h.toml", "[model]\nkind = \"normal_location\"\nsigma = 1.0\n");
    let out = pxaug(&["bound", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hypotheses"));
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "u.toml", "seed = 1\nsede = 2\n");
    let out = pxaug(&["bound", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sede") && err.contains('2'), "{err}");
}

#[test]
fn numerical_failure_exits_1_with_partial_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "q.toml",
        r#"
[affinity]
f = { kind = "gamma", shape = 0.3, scale = 1.0 }
g = { kind = "gamma", shape = 0.35, scale = 40.0 }
[quadrature]
abs_tol = 1e-15
rel_tol = 1e-15
max_evaluations = 100
"#,
    );
    let out = pxaug(&["affinity", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("best estimate"));
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.toml", R_MEASURE);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("r.json");
    let out = pxaug(
        &["r-measure", "--config", cfg.to_str().unwrap(), "--out", target.to_str().unwrap()],
        None,
    );
    assert_ne!(out.status.code(), Some(0));
    assert!(!target.exists());
}

#[test]
fn env_dir_is_the_default_destination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.toml", R_MEASURE);
    let out_dir = dir.path().join("results");
    let out = pxaug(&["r-measure", "--config", cfg.to_str().unwrap(), "--format", "csv"], Some(&out_dir));
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_dir.join("r-measure.csv")).unwrap();
    assert!(text.starts_with("quantity,value\n"));
    assert!(text.contains("strict,true"));
    assert!(out_dir.join("r-measure.manifest.json").exists());
}

#[test]
fn affinity_with_tabulated_density_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x,density\n");
    for i in 0..=400 {
        let x = -8.0 + 16.0 * i as f64 / 400.0;
        csv.push_str(&format!("{x},{}\n", (-x * x / 2.0f64).exp()));
    }
    std::fs::write(dir.path().join("std.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "a.toml",
        r#"
[affinity]
f = { kind = "tabulated", path = "std.csv" }
g = { kind = "normal", mean = 0.0, sd = 1.0 }
n = 3
"#,
    );
    let out = pxaug(&["affinity", "--config", cfg.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["affinity"].as_f64().unwrap() - 1.0).abs() < 1e-4);
    assert!(v["product_affinity"].is_f64());
}

#[test]
fn command_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("command = \"survey\"\n{R_MEASURE}"));
    let out = pxaug(&["r-measure", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}
