use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn photonq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photonq")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn params(dir: &Path, body: &str) -> String {
    let p = dir.join("params.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(id: &str, name: &str, body: &str) -> (Output, PathBuf) {
    let dir = scratch(name);
    let p = params(&dir, body);
    let out = photonq(&["run", id, "--params", &p, "--seed", "3", "--out", dir.to_str().unwrap()]);
    (out, dir)
}

fn document(dir: &Path, id: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(format!("{id}.json"))).unwrap()).unwrap()
}

#[test]
fn list_names_every_experiment_once() {
    let out = photonq(&["list", "--json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    for id in ["hom", "chsh", "ghz-paradox", "leggett", "teleport", "swap", "purify-lo", "grover-box", "repeater-sweep"] {
        assert_eq!(ids.iter().filter(|x| **x == id).count(), 1, "{id}");
    }
    for e in v.as_array().unwrap() {
        let ps = e["parameters"].as_array().unwrap();
        assert!(!ps.is_empty());
        for p in ps {
            assert!(p["doc"].as_str().is_some_and(|d| !d.is_empty()));
            assert!(!p["default"].is_null());
        }
    }
}

#[test]
fn version_flag() {
    let out = photonq(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(photonq::VERSION));
}

#[test]
fn chsh_default_is_tsirelson() {
    let (out, dir) = run("chsh", "chsh", "");
    assert!(out.status.success());
    let d = document(&dir, "chsh");
    let s = d["summary"]["S"].as_f64().unwrap();
    assert_eq!(format!("{s:.10}"), "2.8284271247");
    assert_eq!(d["status"], "ok");
    assert_eq!(d["provenance"]["seed"], 3);
    assert_eq!(d["provenance"]["id"], "chsh");
    assert_eq!(d["provenance"]["version"], photonq::VERSION);
    assert_eq!(d["provenance"]["parameters"]["visibility"], 1.0);
}

#[test]
fn leggett_sweep_flags() {
    let (out, dir) = run("leggett", "leggett", "phi_min = 1.0\nphi_max = 45.0\nstep = 1.0\n");
    assert!(out.status.success());
    let d = document(&dir, "leggett");
    let rows = d["series"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 45);
    // violated exactly while φ < 2 asin(1/π) ≈ 37.12°
    for r in rows {
        let phi = r[0].as_f64().unwrap();
        assert_eq!(r[3].as_bool().unwrap(), phi < 37.12, "{phi}");
    }
}

#[test]
fn unknown_id_exits_2() {
    assert_eq!(photonq(&["run", "nope", "--out", scratch("nope").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn invalid_parameters_exit_3_and_name_the_field() {
    for (id, body, field) in [
        ("purify-lo", "fidelity = 0.5\n", "fidelity"),
        ("purify-lo", "fidelity = 0.3\n", "fidelity"),
        ("chsh", "visibility = 1.5\n", "visibility"),
        ("grover-box", "marked = 4\n", "marked"),
        ("teleport", "mode = \"partial\"\n", "mode"),
        ("hom", "shots = 1.5\n", "shots"),
        ("hom", "bogus = 1\n", "bogus"),
    ] {
        let (out, _) = run(id, &format!("bad-{id}-{field}"), body);
        assert_eq!(out.status.code(), Some(3), "{id} {body}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(field), "{id}");
    }
}

#[test]
fn infeasible_repeater_exits_4_with_reason() {
    let (out, _) = run("repeater-sweep", "infeasible", "f1 = 0.55\nconnection_error = 0.1\nL = 4\nM = 4\n");
    assert_eq!(out.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["status"], "infeasible");
    assert!(v["reason"]["detail"].as_str().is_some());
}

#[test]
fn repeater_csv_has_sweep_columns() {
    let dir = scratch("csv");
    let p = params(&dir, "max_segments = 8\nruns = 200\n");
    let out = photonq(&["run", "repeater-sweep", "--params", &p, "--seed", "1", "--csv", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("repeater-sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,L,M,F1,mean_time,p50,p95,final_F,R");
    assert_eq!(lines.len(), 4);
}

#[test]
fn different_seeds_change_sampled_series() {
    let dir = scratch("seeds");
    let a = photonq(&["run", "hom", "--seed", "1", "--out", dir.join("a").to_str().unwrap()]);
    let b = photonq(&["run", "hom", "--seed", "2", "--out", dir.join("b").to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    let (x, y) = (document(&dir.join("a"), "hom"), document(&dir.join("b"), "hom"));
    assert_eq!(x["summary"], y["summary"]);
    assert_ne!(x["series"], y["series"]);
}
