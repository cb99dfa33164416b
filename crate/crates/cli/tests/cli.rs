use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tigm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tigm")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn write_spec(dir: &TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const TWO_LOOP: &str = r#"{"k":2,"loops":{"1":1.0},"tail":{"-1":0.3,"2":0.3,"3":0.2},"tail_mass":0.2,"divergent":false}"#;
const THREE_LOOP: &str = r#"{"k":2,"loops":{"1":9.0,"2":9.0},"tail":{},"tail_mass":112.0,"divergent":false}"#;
const DIVERGENT: &str = r#"{"k":2,"loops":{"1":2.0},"divergent":true}"#;

#[test]
fn thresholds_at_nine() {
    let v = json(&tigm(&["thresholds", "--lambda", "9"]));
    assert_eq!(v["Lambda1"].as_f64(), Some(126.0));
    let l2 = v["Lambda2"].as_f64().unwrap();
    // 1/512 form of the second threshold, written out independently
    let l = 9.0_f64;
    let w = 9.0 * l * l + 32.0 * l;
    let reference = (w * w.sqrt() + 27.0 * l.powi(3) + 144.0 * l * l + 1152.0 * l) / 512.0;
    assert!((l2 - reference).abs() < 1e-9 * reference);
}

#[test]
fn thresholds_meet_at_the_critical_activity() {
    let v = json(&tigm(&["thresholds", "--lambda", "49/9"]));
    let exact = 1274.0 / 27.0;
    for key in ["Lambda1", "Lambda2"] {
        assert!((v[key].as_f64().unwrap() - exact).abs() < 1e-12 * exact);
    }
}

#[test]
fn negative_activity_is_an_input_error() {
    let out = tigm(&["thresholds", "--lambda", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_counts() {
    let dir = TempDir::new().unwrap();
    let two = write_spec(&dir, "two.json", TWO_LOOP);
    let three = write_spec(&dir, "three.json", THREE_LOOP);
    assert_eq!(json(&tigm(&["solve", &two])).as_array().unwrap().len(), 1);
    let all = json(&tigm(&["solve", &three, "--graph", "three-loop"]));
    let all = all.as_array().unwrap();
    assert_eq!(all.len(), 5);
    assert!(all.iter().all(|s| s["residual"].as_f64().unwrap() < 1e-10));
    let wrong = tigm(&["solve", &two, "--graph", "three-loop"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn divergent_spec_has_no_measure() {
    let dir = TempDir::new().unwrap();
    let d = write_spec(&dir, "d.json", DIVERGENT);
    for args in [vec!["solve", d.as_str()], vec!["chain", d.as_str(), "--window", "3"]] {
        let out = tigm(&args);
        assert_eq!(out.status.code(), Some(3));
        assert!(String::from_utf8_lossy(&out.stderr).contains("no TIGM"));
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn missing_and_malformed_spec_files() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(tigm(&["solve", missing.to_str().unwrap()]).status.code(), Some(2));
    let bad = write_spec(&dir, "bad.json", r#"{"loops":{"1":-1.0}}"#);
    assert_eq!(tigm(&["solve", &bad]).status.code(), Some(2));
}

#[test]
fn classify_cases() {
    for (lambda, total, count, case) in [("9", "130", 5, "iv"), ("9", "100", 3, "iii"), ("4", "30", 1, "ii")] {
        let v = json(&tigm(&["classify", "--lambda", lambda, "--Lambda", total]));
        assert_eq!(v["count"].as_u64(), Some(count));
        assert_eq!(v["case"].as_str(), Some(case));
    }
    let v = json(&tigm(&["classify", "--lambda", "9", "--Lambda", "inf"]));
    assert_eq!(v["count"].as_u64(), Some(0));
    assert_eq!(v["case"].as_str(), Some("divergent"));
}

#[test]
fn chain_report_and_csv() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "two.json", TWO_LOOP);
    let out_dir = dir.path().join("csv");
    let v = json(&tigm(&[
        "chain",
        &spec,
        "--window",
        "5",
        "--format",
        "csv",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]));
    let report = &v[0];
    assert!(report["row_sum_error"].as_f64().unwrap() < 1e-12);
    assert!(report["stationarity"]["max_residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(report["irreducible"].as_bool(), Some(true));

    let p = fs::read_to_string(out_dir.join("P0.csv")).unwrap();
    let mut lines = p.lines();
    assert_eq!(lines.next(), Some("-1,0,1,2,3,TAIL"));
    for line in lines {
        let sum: f64 = line.split(',').map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
    let x = fs::read_to_string(out_dir.join("X0.csv")).unwrap();
    assert_eq!(x.lines().count(), 2);
}

#[test]
fn chain_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "three.json", THREE_LOOP);
    let v = json(&tigm(&["chain", &spec, "--window", "2", "--solution", "3"]));
    let entry = &v.as_array().unwrap()[0];
    let p: tigm::Kernel = serde_json::from_value(entry["P"].clone()).unwrap();
    let x: tigm::Stationary = serde_json::from_value(entry["X"].clone()).unwrap();
    let s: tigm::Solution = serde_json::from_value(entry["solution"].clone()).unwrap();
    assert_eq!(p.states, x.states);
    assert!(s.residual < 1e-10);
    assert_eq!(tigm(&["chain", &spec, "--window", "2", "--solution", "9"]).status.code(), Some(2));
}

#[test]
fn chain_window_too_small() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "two.json", TWO_LOOP);
    let out = tigm(&["chain", &spec, "--window", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

fn sample_run(spec: &str, samples: &Path) -> (Value, String) {
    let v = json(&tigm(&[
        "sample",
        spec,
        "--depth",
        "6",
        "--trees",
        "40",
        "--seed",
        "11",
        "--samples",
        samples.to_str().unwrap(),
    ]));
    (v, fs::read_to_string(samples).unwrap())
}

#[test]
fn sampling_is_admissible_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "two.json", TWO_LOOP);
    let (a, trees_a) = sample_run(&spec, &dir.path().join("a.json"));
    let (b, trees_b) = sample_run(&spec, &dir.path().join("b.json"));
    assert_eq!(a, b);
    assert_eq!(trees_a, trees_b);
    assert_eq!(a["inadmissible_edges"].as_u64(), Some(0));
    assert_eq!(a["admissible_fraction"].as_f64(), Some(1.0));
    assert_eq!(a["level_tv"].as_array().unwrap().len(), 7);
    let trees: Vec<tigm::sampler::TreeSample> = serde_json::from_str(&trees_a).unwrap();
    assert_eq!(trees.len(), 40);
    // root with three neighbours, every other vertex with two children
    assert_eq!(trees[0].spins.len(), 1 + 3 * 63);
}

#[test]
fn empty_sweep_is_header_only() {
    let out = tigm(&["sweep", "--lambda-grid", "", "--out", "-"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "lambda,Lambda,count_closed_form,count_oracle,agree\n");
}

#[test]
fn sweep_agrees_with_the_oracle() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = tigm(&[
        "sweep",
        "--lambda-grid",
        "4,9",
        "--Lambda-grid",
        "10,20,130,200",
        "--starts",
        "60",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    // (9, 10) falls below the loop mass and is dropped
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| &r[4] == "true"), "{rows:?}");
    let counts: Vec<&str> = rows.iter().map(|r| &r[2]).collect();
    assert_eq!(counts, ["3", "3", "1", "1", "3", "5", "1"]);
}

#[test]
fn curve_dump_meets_at_the_boundary() {
    let out = tigm(&["sweep", "--emit-curves", "f,g", "--x", "2.5", "--Lambda", "6", "--points", "50"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,f,g"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 50);
    let last = rows.last().unwrap();
    assert!((last[0] - 2.5 * 2.5 / 4.0).abs() < 1e-15);
    assert!((last[1] - last[2]).abs() < 1e-12);
    for r in &rows {
        let gap = 2.0 * 2.5_f64.powi(3) * (2.5 * 2.5 - 4.0 * r[0]).max(0.0).sqrt();
        assert!((r[1] - r[2] - gap).abs() < 1e-10);
    }
    let bad = tigm(&["sweep", "--emit-curves", "f,h", "--x", "2.5", "--Lambda", "6"]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = tigm(&["sweep", "--emit-curves", "h,delta", "--x", "2.5"]);
    assert_eq!(missing.status.code(), Some(2));
}
