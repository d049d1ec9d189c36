use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlosim_core::metrics::parse_flows_csv;

fn mlosim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlosim")).args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_shipped_scenarios() {
    for name in ["jamming.toml", "bk_confined_5ghz.toml", "legacy_last_resort.toml"] {
        let out = mlosim(&["validate", "--scenario", &scenario(name)]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "OK");
    }
}

#[test]
fn validate_reports_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        r#"duration_us = 0
color = "blue"

[[channels]]
id = 0
band = "5GHz"
mcs = [{ index = 0, rate_mbps = 54.0 }]
base_loss = 1.5

[[lmacs]]
channel = 0
"#,
    )
    .unwrap();
    let out = mlosim(&["validate", "--scenario", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key `color`"), "{err}");
    assert!(err.contains("base loss 1.5"), "{err}");
    assert!(err.contains("duration"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mlosim(&["run", "--seed", "x"]).status.code(), Some(2));
    assert_eq!(mlosim(&["frobnicate"]).status.code(), Some(2));
    let out = mlosim(&["sweep", "--scenario", "a.toml", "--seeds", "1..2", "--policies", "split"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_scenario_exits_one() {
    let out = mlosim(&["run", "--scenario", "/nonexistent.toml", "--seed", "1", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlosim(&[
        "run",
        "--scenario",
        &scenario("bk_confined_5ghz.toml"),
        "--seed",
        "3",
        "--out",
        s(dir.path()),
        "--trace",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let flows = parse_flows_csv(&fs::read_to_string(dir.path().join("flows.csv")).unwrap()).unwrap();
    assert_eq!(flows.len(), 2);
    assert!(flows.iter().all(|f| f.conserved() && f.generated > 0));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.lines().last().unwrap().contains("sim_end"));
}

#[test]
fn sweep_layout_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlosim(&[
        "sweep",
        "--scenario",
        &scenario("legacy_last_resort.toml"),
        "--seeds",
        "1..10",
        "--policies",
        "crs,late_fifo",
        "--jobs",
        "4",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for p in ["crs", "late_fifo"] {
        for seed in 1..=10 {
            let d = dir.path().join(p).join(format!("seed-{seed}"));
            for f in ["meta.csv", "flows.csv", "links.csv"] {
                assert!(d.join(f).is_file(), "{}", d.join(f).display());
            }
        }
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    // header plus two flows per (policy, seed)
    assert_eq!(summary.lines().count(), 1 + 2 * 10 * 2);
}

#[test]
fn sweep_matches_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("jamming.toml");
    let sweep = dir.path().join("sweep");
    let single = dir.path().join("single");
    assert!(mlosim(&["sweep", "--scenario", &sc, "--seeds", "4..5", "--policies", "crs", "--jobs", "2", "--out", s(&sweep)])
        .status
        .success());
    assert!(mlosim(&["run", "--scenario", &sc, "--seed", "5", "--policy", "crs", "--out", s(&single)])
        .status
        .success());
    for f in ["meta.csv", "flows.csv", "links.csv"] {
        assert_eq!(
            fs::read(sweep.join("crs/seed-5").join(f)).unwrap(),
            fs::read(single.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn compare_two_policies() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("jamming.toml");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(mlosim(&["run", "--scenario", &sc, "--seed", "2", "--policy", "crs", "--out", s(&a)]).status.success());
    assert!(mlosim(&["run", "--scenario", &sc, "--seed", "2", "--policy", "static", "--out", s(&b)]).status.success());
    let out = mlosim(&["compare", "--a", s(&a), "--b", s(&b)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("scope,metric,a,b,delta,verdict\n"));
    assert!(text.lines().count() > 1);

    let c = dir.path().join("c");
    assert!(mlosim(&["run", "--scenario", &sc, "--seed", "3", "--out", s(&c)]).status.success());
    let out = mlosim(&["compare", "--a", s(&a), "--b", s(&c)]);
    assert_eq!(out.status.code(), Some(1));
}
