use std::fs;
use std::path::Path;
use std::process::Command;

use grazing_cli::{run_with, RunConfig};
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn grazing(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("grazing").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn in_dir(dir: &Path, args: &[&str]) -> Run {
    let out = dir.to_str().unwrap();
    let mut all = args.to_vec();
    all.extend(["--out", out]);
    grazing(&all)
}

fn result(r: &Run) -> Value {
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    serde_json::from_str::<Value>(&r.stdout).unwrap()["result"].clone()
}

fn error_kind(r: &Run) -> String {
    let v: Value = serde_json::from_str(r.stderr.trim()).expect("stderr is one JSON object");
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn circle_quantities_report_the_floquet_factor() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&in_dir(dir.path(), &["quantities", "--system", "circle"]));
    let expected = (-4.0 * std::f64::consts::PI).exp();
    let got = r["lambda0"].as_f64().unwrap();
    assert!((got - expected).abs() <= 1e-6 * expected, "{got} vs {expected}");
    assert!(r["identity_max"].as_f64().unwrap() <= 1e-8);
    let written: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("quantities.json")).unwrap()).unwrap();
    assert_eq!(written["result"], r);
    assert_eq!(written["config"]["system"]["id"], "circle");
}

#[test]
fn parabola_trajectory_grazes_at_unit_time() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&in_dir(dir.path(), &["simulate", "--system", "parabola", "--from", "-1,1", "--t", "2"]));
    let graze = r["events"].as_array().unwrap().iter().find(|e| e["event"] == "grazing").expect("grazing event");
    assert!((graze["t"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(graze["p"]["x"].as_f64().unwrap().abs() < 1e-9);
    let end = &r["final_point"];
    assert!((end["x"].as_f64().unwrap() - 1.0).abs() < 1e-8 && (end["y"].as_f64().unwrap() - 1.0).abs() < 1e-8);

    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.split("\r\n");
    assert_eq!(lines.next(), Some("t,x,y,arc_kind,event"));
    assert!(csv.lines().any(|l| l.ends_with(",grazing\r") || l.ends_with(",grazing")));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "[system]\nid = \"circle\"\nspeed = 3\n").unwrap();
    let r = grazing(&["--config", path.to_str().unwrap(), "quantities"]);
    assert_eq!(r.code, 1);
    assert_eq!(error_kind(&r), "InvalidConfig");
    assert!(r.stdout.is_empty());
}

#[test]
fn invalid_values_and_missing_commands_are_config_errors() {
    assert_eq!(grazing(&["quantities", "--system", "pendulum"]).code, 1);
    assert_eq!(grazing(&["simulate", "--from", "1"]).code, 1);
    assert_eq!(grazing(&["--system", "circle"]).code, 1);
    assert_eq!(grazing(&["--help"]).code, 0);
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let r = in_dir(dir.path(), &["quantities", "--system", "parabola"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert_eq!(error_kind(&r), "NotGrazing");

    let r = in_dir(dir.path(), &["quantities", "--a", "0.5"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn printed_config_round_trips() {
    let r = grazing(&["--print-config", "--system", "circle", "--alpha", "-0.01,2e-5", "--jobs", "3"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let cfg = RunConfig::from_toml(&r.stdout).unwrap();
    assert_eq!(cfg.system.id, "circle");
    assert_eq!(cfg.params.alpha, [-0.01, 2e-5]);
    assert_eq!(cfg.run.jobs, 3);
    assert_eq!(cfg.to_toml(), r.stdout);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, &r.stdout).unwrap();
    let again = grazing(&["--config", path.to_str().unwrap(), "--print-config"]);
    assert_eq!(again.stdout, r.stdout);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "[system]\nid = \"parabola\"\n[simulate]\nt = 5.0\n").unwrap();
    let r = grazing(&["--config", path.to_str().unwrap(), "--print-config", "simulate", "--t", "2"]);
    let cfg = RunConfig::from_toml(&r.stdout).unwrap();
    assert_eq!(cfg.system.id, "parabola");
    assert_eq!(cfg.simulate.t, 2.0);
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn diagram_outputs_are_identical_across_thread_counts() {
    let one = tempfile::tempdir().unwrap();
    let many = tempfile::tempdir().unwrap();
    let args = ["diagram"];
    let a = in_dir(one.path(), &[&args[..], &["--jobs", "1"]].concat());
    let b = in_dir(many.path(), &[&args[..], &["--jobs", "4"]].concat());
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(b.code, 0, "{}", b.stderr);

    let strip = |s: &str| s.replace(one.path().to_str().unwrap(), "").replace(many.path().to_str().unwrap(), "");
    let (fa, fb) = (dir_contents(one.path()), dir_contents(many.path()));
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        let (ta, tb) = (String::from_utf8_lossy(ca), String::from_utf8_lossy(cb));
        let normalise = |t: &str| t.replace("\"jobs\": 1", "").replace("\"jobs\": 4", "");
        assert_eq!(normalise(&strip(&ta)), normalise(&strip(&tb)), "{na} differs");
    }

    let result = result(&a);
    assert_eq!(result["consistent"], true);
    let manifest: Value = serde_json::from_slice(&fs::read(one.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["files"].as_array().unwrap().iter().any(|f| f == "regions.csv"));
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn binary_reports_errors_on_stderr_with_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_grazing");
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin)
        .args(["quantities", "--system", "parabola", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["exit_code"], 2);

    let out = Command::new(bin).args(["tangencies", "--system", "circle", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["tool"], "grazing");
}
