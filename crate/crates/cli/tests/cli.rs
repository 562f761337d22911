use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn blender(args: &[&str], config: Option<&str>, dir: &Path) -> i32 {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blender"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("config.json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap().status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const GROWTH: &str = r#"{
  "code": { "generator": "ones" },
  "schedule": { "entries": [[0, 1], [4, 4], [11, 9], [23, 16], [42, 25], [70, 36], [109, 49]] },
  "box": { "lo": { "x": 0.7499915324560957, "y": 0.2, "z": 0.1 },
           "hi": { "x": 0.7500084675439043, "y": 0.8, "z": 0.9 } },
  "growth": { "blocks": 6, "resolution": 128 }
}"#;

#[test]
fn validate_reference_params() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(blender(&["validate-params"], None, dir.path()), 0);
    let v = read_json(&dir.path().join("out/validate_params.json"));
    assert_eq!(v["ok"], true);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn broken_params_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{ "params": { "lambda_ss": 0.25, "lambda_cs0": 0.6, "lambda_cs1": 0.9, "lambda_u": 1.5,
        "a1": 20, "a2": 0.1, "a3": 0.002, "a4": -1, "mu": 0.02, "eps0": 0.01, "eps": 0.05 } }"#;
    assert_eq!(blender(&["validate-params"], Some(cfg), dir.path()), 2);
    assert_eq!(blender(&["orbit"], Some(cfg), dir.path()), 2);
}

#[test]
fn malformed_config_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(blender(&["validate-params"], Some("{ \"params\": "), dir.path()), 4);
    assert_eq!(blender(&["validate-params"], Some("{ \"colour\": 1 }"), dir.path()), 4);
    assert_eq!(blender(&["orbit"], Some("{}"), dir.path()), 4);
    assert_eq!(blender(&["no-such-command"], None, dir.path()), 4);
}

#[test]
fn growth_scenario_reports_crossing_at_six() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(blender(&["growth"], Some(GROWTH), dir.path()), 0);
    let v = read_json(&dir.path().join("out/growth_summary.json"));
    assert_eq!(v["k_star"], 6);
    assert_eq!(v["gate"], true);
    let csv = fs::read_to_string(dir.path().join("out/growth_ledger.csv")).unwrap();
    assert!(csv.starts_with("j,tag,rule,area,factor,cum_bound,cap\n"));
}

#[test]
fn gate_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GROWTH.replace("\"ones\"", "\"zeros\"");
    assert_eq!(blender(&["growth"], Some(&cfg), dir.path()), 3);
}

#[test]
fn outputs_are_byte_identical() {
    let cfg = r#"{ "point": { "x": 0.3, "y": 0.2, "z": 0.6 }, "other_point": { "x": 0.0, "y": 0.5, "z": 0.5 },
                   "n": 300, "sizes": [10, 50, 200], "seed": 7, "cone": { "points": 50, "directions": 8 } }"#;
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            assert_eq!(blender(&["orbit"], Some(cfg), dir.path()), 0);
            assert_eq!(blender(&["wasserstein"], Some(cfg), dir.path()), 0);
            assert_eq!(blender(&["cone-check", "--threads", "2"], Some(cfg), dir.path()), 0);
            ["orbit.csv", "wasserstein.csv", "cone_check.json"]
                .iter()
                .map(|f| fs::read(dir.path().join("out").join(f)).unwrap())
                .collect()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn sampled_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(blender(&["cone-check"], Some("{}"), dir.path()), 4);
    assert_eq!(blender(&["cone-check", "--seed", "3"], Some(r#"{ "cone": { "points": 20, "directions": 4 } }"#), dir.path()), 0);
}

#[test]
fn code_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{ "code": { "generator": "periodic:01" }, "n": 12 }"#;
    assert_eq!(blender(&["decode"], Some(cfg), dir.path()), 0);
    let d = read_json(&dir.path().join("out/decode.json"));
    let p = &d["point"];
    let enc = format!(r#"{{ "point": {{ "x": {}, "y": {}, "z": {} }}, "n": 5 }}"#, p["x"], p["y"], p["z"]);
    assert_eq!(blender(&["encode"], Some(&enc), dir.path()), 0);
    let e = read_json(&dir.path().join("out/encode.json"));
    assert_eq!(e["start"], -5);
    let s = e["symbols"].as_str().unwrap();
    assert!(s.contains("0101") || s.contains("1010"), "{s}");
}

#[test]
fn schedule_normalize_merges_close_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{ "schedule": { "entries": [[0, 5], [6, 3]] }, "horizon": 20 }"#;
    assert_eq!(blender(&["schedule-normalize"], Some(cfg), dir.path()), 0);
    let v = read_json(&dir.path().join("out/schedule.json"));
    assert_eq!(v["was_normalized"], false);
    assert!(v["d1_density"].as_f64().unwrap() > 0.0);
}
