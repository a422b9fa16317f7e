use std::path::Path;
use std::process::{Command, Output};

fn lcflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcflow")).args(args).output().expect("spawn lcflow")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const STATIONARY: &str = r#"
[grid]
M = 16

[data]
scenario = "stationary_director"
m = 1

[scheme]
T = 0.25
dt = 0.015625
tol = 1e-10
allow_large_data = true
"#;

const TAYLOR_GREEN: &str = r#"
[grid]
M = 16

[data]
scenario = "taylor_green"

[scheme]
T = 0.25
dt = 0.015625
tol = 1e-10
allow_large_data = true
"#;

fn simulate(dir: &Path, config: &str) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    lcflow(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn max_weak(dir: &Path) -> f64 {
    let mut r = csv::Reader::from_path(dir.join("weak.csv")).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().skip(5).map(|v| v.parse::<f64>().unwrap().abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (body, key) in [("[grid]\nM = 15\n", "grid.M"), ("[scheme]\nT = -1.0\n", "scheme.T"), ("[grid]\nmesh = 3\n", "mesh")] {
        let cfg = dir.path().join("bad.toml");
        std::fs::write(&cfg, body).unwrap();
        let o = lcflow(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body:?}");
        assert!(text(&o.stderr).contains(key), "{body:?}: {}", text(&o.stderr));
    }
}

#[test]
fn missing_config_is_an_error() {
    let o = lcflow(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_stationary_director() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), STATIONARY);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = dir.path().join("out");
    for f in ["config.resolved.toml", "trajectory.toml", "iterations.csv", "ledger.csv", "diagnostics.csv", "weak.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert!(max_weak(&out) <= 1e-6);
    assert!(text(&o.stdout).contains("converged true"));
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(simulate(a.path(), TAYLOR_GREEN).status.success());
    assert!(simulate(b.path(), TAYLOR_GREEN).status.success());
    for f in ["iterations.csv", "diagnostics.csv", "weak.csv", "ledger.csv"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn verify_single_duhamel_lemma() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcflow(&["--out", dir.path().to_str().unwrap(), "verify", "duhamel", "--lemma", "2.2", "--trials", "5", "--m", "8", "--k", "16"]);
    assert!(o.status.success(), "{}{}", text(&o.stdout), text(&o.stderr));
    let verdict = std::fs::read_to_string(dir.path().join("verdict.txt")).unwrap();
    assert!(verdict.contains("PASS duhamel 2.2"), "{verdict}");
    assert!(verdict.trim_end().ends_with("OVERALL PASS"));
}

#[test]
fn unknown_lemma_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcflow(&["--out", dir.path().to_str().unwrap(), "verify", "duhamel", "--lemma", "9.9", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn besov_report_and_lagrangian_checks() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), TAYLOR_GREEN).status.success());
    let run = dir.path().join("out");
    let snap = run.join("snapshots").join("u_00000.elf");
    let rep = dir.path().join("report");
    let o = lcflow(&["--out", rep.to_str().unwrap(), "besov", "report", snap.to_str().unwrap(), "--index", "-0.5,2,inf"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("heat characterization"));
    assert!(rep.join("besov_blocks.csv").exists());

    for check in ["identities", "residuals", "deltaA"] {
        let o = lcflow(&["--out", rep.to_str().unwrap(), "lagrangian", "--in", run.to_str().unwrap(), "--check", check]);
        assert!(o.status.success(), "{check}: {}{}", text(&o.stdout), text(&o.stderr));
    }
}

#[test]
fn bad_besov_index_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcflow(&["--out", dir.path().to_str().unwrap(), "besov", "report", "x.elf", "--index", "1,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("--index"));
}

#[test]
fn verify_all_on_a_resolved_small_data_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[grid]\nM = 16\n[data]\nscenario = \"random_small\"\neta = 0.01\n[scheme]\nT = 0.25\ndt = 0.001953125\ntol = 1e-12\n";
    let o = simulate(dir.path(), config);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let run = dir.path().join("out");
    let ver = dir.path().join("verify");
    let o = lcflow(&["--out", ver.to_str().unwrap(), "verify", "all", "--in", run.to_str().unwrap(), "--trials", "5"]);
    let verdict = std::fs::read_to_string(ver.join("verdict.txt")).unwrap();
    assert!(o.status.success(), "{verdict}");
    for suite in ["energy-law", "weak-form", "scaling", "lagrangian", "duhamel A.4", "besov"] {
        assert!(verdict.contains(&format!("PASS {suite}")), "{suite}: {verdict}");
    }
}
