use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use heatlab_cli::artifacts::{sha256_hex, RunManifest};
use heatlab_cli::commands::trajectory_plot;
use heatlab_core::estimates::{aggregate, ExperimentReport};

fn heatlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("HEATLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_manifest_complete(dir: &Path) -> RunManifest {
    let m = manifest(dir);
    for e in &m.artifacts {
        let bytes = fs::read(dir.join(&e.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), e.sha256, "{}", e.path);
    }
    let mut on_disk = Vec::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        if rel != "manifest.json" {
            on_disk.push(rel);
        }
    }
    on_disk.sort();
    let listed: Vec<String> = m.artifacts.iter().map(|e| e.path.clone()).collect();
    assert_eq!(on_disk, listed);
    m
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

const SMALL_GRID: &str = "[grid]\ndim = 2\nperiod = 16\npoints = 64\n";

#[test]
fn simulate_defocusing_completes_with_monotone_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.ini",
        &format!("{SMALL_GRID}[data]\namplitude = 2\n[solver]\nmu = -1\nt_end = 4\nrecord_snapshots = true\n"),
    );
    let out = heatlab(&["simulate", "--config", &cfg, "--output", "run", "--plots"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("run");
    let csv = fs::read_to_string(dir.join("trajectory_seed0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("#schema=1"));
    assert_eq!(lines.next(), Some("t,l2,l2p4d_x,h1,linf,lowfreq_l2,N_of_t"));
    let l2: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(l2.len() > 10);
    for w in l2.windows(2) {
        assert!(w[1] <= w[0] + 1e-10);
    }
    let m = assert_manifest_complete(&dir);
    assert!(m.verdict.pass);
    assert!(m.artifacts.iter().any(|a| a.path.starts_with("snapshots/")));
    assert!(dir.join("trajectory_seed0.svg").exists());
}

#[test]
fn simulate_focusing_bump_reports_blowup() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "blow.ini",
        &format!("{SMALL_GRID}[data]\nkind = gaussian\namplitude = 10\nwidth = 1\n[solver]\nmu = 1\nt_end = 1\n"),
    );
    let out = heatlab(&["simulate", "--config", &cfg, "--output", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let m = assert_manifest_complete(&tmp.path().join("run"));
    assert_eq!(m.verdict.outcome, "blowup_detected");
    assert!(m.verdict.notes[0].contains("blowup_detected at t ="), "{:?}", m.verdict.notes);
}

#[test]
fn odd_grid_is_rejected_with_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.ini", "[grid]\ndim = 2\npoints = 63\n");
    let out = heatlab(&["simulate", "--config", &cfg, "--output", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("points"), "{err}");
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn experiment_field_must_match_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.ini", &format!("[run]\nexperiment = verify\n{SMALL_GRID}"));
    let out = heatlab(&["simulate", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

const VERIFY: &str = "[grid]\ndim = 2\nperiod = 16\npoints = 128\n\
[data]\ngamma0 = 0.2\n[ensemble]\ncount = 4\nbase_seed = 3\n\
[verify]\nhorizon = 2\nmismatch_scales = 2, 4, 8\nw0_scales = 2, 4, 8, 16\n";

#[test]
fn verify_is_deterministic_and_aggregates_recompute() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.ini", VERIFY);
    let a = heatlab(&["verify", "--config", &cfg, "--output", "a", "--jobs", "1"], tmp.path());
    let b = heatlab(&["verify", "--config", &cfg, "--output", "b", "--jobs", "3", "--plots"], tmp.path());
    assert!(matches!(a.status.code(), Some(0 | 1)));
    assert_eq!(a.status.code(), b.status.code());
    let ra = fs::read(tmp.path().join("a/report.json")).unwrap();
    let rb = fs::read(tmp.path().join("b/report.json")).unwrap();
    assert_eq!(ra, rb);
    assert_manifest_complete(&tmp.path().join("b"));

    let report: ExperimentReport = serde_json::from_slice(&ra).unwrap();
    let ids: Vec<&str> = report.verdicts.iter().map(|v| v.criterion_id.as_str()).collect();
    for id in [
        "bernstein_spread",
        "derivative_bands",
        "mismatch_slope",
        "w0_slope",
        "v0_control",
        "radial_spread",
        "strichartz_spread",
        "duhamel_spread",
        "smoothing_spread",
    ] {
        assert!(ids.contains(&id), "{id} missing from {ids:?}");
    }
    assert_eq!(report.per_member.len(), 4);
    assert_eq!(aggregate(&report.per_member), report.aggregates);
    assert_eq!(report.config_digest, manifest(&tmp.path().join("a")).config_digest);
}

#[test]
fn zero_tolerance_knob_forces_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.ini", &format!("{VERIFY}strichartz_spread = 0\n"));
    let out = heatlab(&["verify", "--config", &cfg, "--output", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let report: ExperimentReport = serde_json::from_slice(&fs::read(tmp.path().join("o/report.json")).unwrap()).unwrap();
    let v = report.verdicts.iter().find(|v| v.criterion_id == "strichartz_spread").unwrap();
    assert!(!v.pass);
    assert!(!manifest(&tmp.path().join("o")).verdict.pass);
}

#[test]
fn sweep_rejects_gamma0_outside_range() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.ini", &format!("{SMALL_GRID}[sweep]\ngamma0 = 0.1, 0.3\n"));
    let out = heatlab(&["decay-sweep", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(d-1)/(d+2)") && err.contains("0.2500"), "{err}");
}

#[test]
fn sweep_at_gamma0_zero_uses_the_flat_slope_rule() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.ini",
        "[grid]\ndim = 2\nperiod = 32\npoints = 64\n[data]\namplitude = 0.5\n\
         [solver]\nt_end = 4\n[sweep]\ngamma0 = 0\nfit_lo = 0.1\nfit_hi = 4\n",
    );
    let out = heatlab(&["decay-sweep", "--config", &cfg, "--output", "o", "--plots"], tmp.path());
    let code = out.status.code();
    assert!(matches!(code, Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("o/slopes.csv")).unwrap();
    let linear = csv.lines().find(|l| l.contains(",linear,")).unwrap();
    let slope: f64 = linear.split(',').nth(3).unwrap().parse().unwrap();
    let report: ExperimentReport = serde_json::from_slice(&fs::read(tmp.path().join("o/report.json")).unwrap()).unwrap();
    let v = report.verdicts.iter().find(|v| v.criterion_id == "linear/gamma0=0.0000").unwrap();
    assert!(v.detail.contains("|slope| <= 0.03"), "{}", v.detail);
    assert_eq!(v.pass, slope.abs() <= 0.03);
    assert_eq!(code == Some(0), report.all_pass());
    assert!(tmp.path().join("o/slopes.svg").exists());
    assert_manifest_complete(&tmp.path().join("o"));
}

#[test]
fn decompose_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.ini",
        "[grid]\ndim = 2\nperiod = 16\npoints = 128\n[decompose]\nscales = 1, 2, 4\n[ensemble]\nseeds = 2, 1\n",
    );
    let out = heatlab(&["decompose", "--config", &cfg, "--output", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(tmp.path().join("o/decompose.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["seed"], 1);
    for r in &rows {
        assert!(r["mismatch_leak"].as_f64().unwrap() >= 0.0);
        assert!(r["w0_l2"].as_f64().is_some());
    }
}

#[test]
fn plot_from_single_record_and_slope_cross_read() {
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("one.csv");
    fs::write(&one, "#schema=1\nt,l2,l2p4d_x,h1,linf,lowfreq_l2,N_of_t\n1e0,2e0,1e0,1e0,1e0,,\n").unwrap();
    let (svg, fit) = trajectory_plot(&one, (0.5, 2.0), "one").unwrap();
    assert!(fit.is_none());
    assert_eq!(svg.matches("<circle").count(), 1);
    assert!(!svg.contains("<line"));
    assert!(trajectory_plot(&tmp.path().join("missing.csv"), (0.5, 2.0), "x").is_err());

    let cfg = write_config(
        tmp.path(),
        "sim.ini",
        &format!("{SMALL_GRID}[solver]\nt_end = 4\nfit_lo = 0.5\nfit_hi = 4\n"),
    );
    let out = heatlab(&["simulate", "--config", &cfg, "--output", "run", "--plots"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("run/summary.json")).unwrap()).unwrap();
    let slope = summary[0]["fit"]["slope"].as_f64().unwrap();
    let svg = fs::read_to_string(tmp.path().join("run/trajectory_seed0.svg")).unwrap();
    assert!(svg.contains(&format!("slope = {slope:.3}")), "{slope}");
    let (again, _) = trajectory_plot(&tmp.path().join("run/trajectory_seed0.csv"), (0.5, 4.0), "L2 norm, seed 0").unwrap();
    assert_eq!(again, svg);
}

#[test]
fn thread_cap_does_not_change_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.ini",
        &format!("{SMALL_GRID}[solver]\nt_end = 1\n[ensemble]\ncount = 3\n"),
    );
    let capped = Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .args(["simulate", "--config", &cfg, "--output", "capped", "--jobs", "4"])
        .current_dir(tmp.path())
        .env("HEATLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(0));
    let free = heatlab(&["simulate", "--config", &cfg, "--output", "free", "--jobs", "3"], tmp.path());
    assert_eq!(free.status.code(), Some(0));
    for seed in 0..3 {
        let name = format!("trajectory_seed{seed}.csv");
        assert_eq!(
            fs::read(tmp.path().join("capped").join(&name)).unwrap(),
            fs::read(tmp.path().join("free").join(&name)).unwrap()
        );
    }
}
