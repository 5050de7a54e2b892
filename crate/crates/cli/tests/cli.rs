use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use lattice_defects::scene::load_scene;
use lattice_defects::Complex64;
use lattice_defects_cli::{execute, Command, RunConfig};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn complex(v: &Value) -> Complex64 {
    Complex64::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

/// `freq_index -> site coords -> value` from grid output.
fn parse_grid(text: &str) -> HashMap<(usize, Vec<i64>), Complex64> {
    let mut out = HashMap::new();
    let mut freq = 0;
    for line in text.lines() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if line.starts_with('#') {
            if let Some(i) = tokens.iter().position(|t| *t == "freq_index") {
                freq = tokens[i + 1].parse().unwrap();
            }
            continue;
        }
        if tokens.len() < 3 {
            continue;
        }
        let n = tokens.len();
        let coords = tokens[..n - 2].iter().map(|t| t.parse().unwrap()).collect();
        let z = Complex64::new(
            tokens[n - 2].parse().unwrap(),
            tokens[n - 1].parse().unwrap(),
        );
        out.insert((freq, coords), z);
    }
    out
}

#[test]
fn forward_then_invert_recovers_fixture_defects() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["sparse.json", "dense.json", "line.json"] {
        let truth = load_scene(&std::fs::read_to_string(fixture(name)).unwrap())
            .unwrap()
            .defects
            .unwrap();
        let measured = execute(&RunConfig::new(Command::Forward, fixture(name))).unwrap();
        let path = write(dir.path(), name, &measured);
        assert!(load_scene(&measured).unwrap().measurements.is_some());
        let report = json(&execute(&RunConfig::new(Command::Invert, &path)).unwrap());
        assert_eq!(report["status"], "UNIQUE", "{name}");
        let got = report["candidates"][0]["defects"].as_array().unwrap();
        let num: f64 = got
            .iter()
            .zip(truth.0.iter())
            .map(|(g, t)| (complex(g) - t).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(num < 1e-8 * truth.0.norm().max(1.0), "{name}: {num}");
    }
}

#[test]
fn field_without_defects_matches_unperturbed_lattice() {
    let mut cfg = RunConfig::new(Command::Field, fixture("free_field.json"));
    cfg.radius = Some(8);
    let field = parse_grid(&execute(&cfg).unwrap());
    let oracle =
        parse_grid(&execute(&RunConfig::new(Command::Oracle, fixture("free_field.json"))).unwrap());
    assert_eq!(field.len(), 17 * 17);
    for (key, v) in &field {
        let o = oracle[key];
        assert!(
            (v - o).norm() <= 1e-9 * o.norm().max(1e-12),
            "{key:?}: {v} vs {o}"
        );
    }
}

#[test]
fn tampered_measurement_is_inconsistent_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let measured = execute(&RunConfig::new(Command::Forward, fixture("dense.json"))).unwrap();
    let mut doc = json(&measured);
    let entry = &mut doc["measurements"][1]["values"][0];
    let bumped = entry[0].as_f64().unwrap() + 0.05;
    entry[0] = serde_json::json!(bumped);
    let path = write(
        dir.path(),
        "tampered.json",
        &serde_json::to_string(&doc).unwrap(),
    );
    let out = Process::new(env!("CARGO_BIN_EXE_latdef"))
        .args(["invert", "--scene"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = json(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(report["status"], "INCONSISTENT");
    assert_eq!(report["frequencies"][1]["consistent"], false);
}

#[test]
fn bound_filter_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "m.json",
        &execute(&RunConfig::new(Command::Forward, fixture("dense.json"))).unwrap(),
    );
    let mut cfg = RunConfig::new(Command::Invert, &path);
    cfg.bound = Some(0.5);
    let report = json(&execute(&cfg).unwrap());
    // planted defect has a 1.2 entry, so the box removes it
    assert_eq!(report["candidates"].as_array().unwrap().len(), 0);
    assert_eq!(report["box_bound"].as_f64(), Some(0.5));
}

#[test]
fn two_frequency_cloak_reports_no_candidate() {
    let out = execute(&RunConfig::new(
        Command::Cloak,
        fixture("cloak_two_freq.json"),
    ))
    .unwrap();
    assert_eq!(json(&out)["status"], "NO_CANDIDATE");
    let out = execute(&RunConfig::new(Command::Cloak, fixture("cloak.json"))).unwrap();
    assert_eq!(json(&out)["status"], "DESIGNED");
}

#[test]
fn green_dump_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(Command::Green, fixture("line.json"));
    cfg.offset_box = Some(6);
    let dump = execute(&cfg).unwrap();
    let path = write(dir.path(), "g.txt", &dump);
    let mut again = RunConfig::new(Command::Green, fixture("line.json"));
    again.offset_box = Some(6);
    again.load_table = Some(path);
    assert_eq!(execute(&again).unwrap(), dump);
}

fn run_binary(args: &[&str]) -> (i32, Value) {
    let out = Process::new(env!("CARGO_BIN_EXE_latdef"))
        .args(args)
        .output()
        .unwrap();
    let code = out.status.code().unwrap();
    (code, json(&String::from_utf8(out.stdout).unwrap()))
}

#[test]
fn errors_produce_documents_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let (code, doc) = run_binary(&["forward", "--scene", missing.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(doc["error"]["exit_code"], 1);

    let broken = write(dir.path(), "broken.json", "{\"dimension\": 2,");
    let (code, doc) = run_binary(&["forward", "--scene", broken.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(doc["error"]["module"], "scene");

    let mut scene = json(&std::fs::read_to_string(fixture("line.json")).unwrap());
    scene["frequencies"] = serde_json::json!([{ "omega": [1.0, 0.0] }]);
    let passband = write(
        dir.path(),
        "passband.json",
        &serde_json::to_string(&scene).unwrap(),
    );
    let (code, doc) = run_binary(&["forward", "--scene", passband.to_str().unwrap()]);
    assert_eq!(code, 1, "{doc}");
    assert!(doc["error"]["message"]
        .as_str()
        .unwrap()
        .contains("passband"));

    let (code, doc) = run_binary(&["invert", "--scene", fixture("line.json").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(doc["error"]["message"]
        .as_str()
        .unwrap()
        .contains("measurements"));

    let line = fixture("line.json");
    let (code, doc) = run_binary(&[
        "green",
        "--scene",
        line.to_str().unwrap(),
        "--tol-floor",
        "10",
    ]);
    assert_eq!(code, 2);
    assert_eq!(doc["error"]["module"], "brillouin");
}
