use std::process::Command;

use fbm_cond::cli::run;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["fbmcond"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.extend_from_slice(&["--format", "json"]);
    let (code, out, err) = call(&a);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn rows(v: &Value) -> &Vec<Value> {
    v["rows"].as_array().unwrap()
}

fn num(row: &Value, key: &str) -> f64 {
    row[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {row}"))
}

#[test]
fn variance_table_values() {
    let v = json(&["variance", "--model", "fou", "--sigma", "0.3", "--lambda", "0.5", "--hurst", "0.5", "--s", "0", "--t", "5"]);
    assert!((num(&rows(&v)[0], "std") - 0.2990).abs() < 1e-4);
    let v = json(&["variance", "--model", "fbm", "--hurst", "0.5", "--s", "0", "--t", "5"]);
    assert!((num(&rows(&v)[0], "std") - 2.2361).abs() < 1e-4);
}

#[test]
fn json_has_meta_and_rows() {
    let v = json(&["variance", "--model", "fbm", "--hurst", "0.2:0.8:0.3", "--t", "2:3:1"]);
    let obj = v.as_object().unwrap();
    assert!(obj.contains_key("meta") && obj.contains_key("rows"));
    let meta = &v["meta"];
    assert_eq!(meta["command"], "variance");
    for key in ["hurst", "lambda", "sigma", "step_m", "range_a", "max_terms", "tol", "seed", "dt", "paths"] {
        assert!(meta["args"].get(key).is_some(), "meta.args lacks {key}");
    }
    // grid: 3 hurst x 2 t, last flag fastest
    let r = rows(&v);
    assert_eq!(r.len(), 6);
    assert_eq!(num(&r[0], "t"), 2.0);
    assert_eq!(num(&r[1], "t"), 3.0);
    assert!((num(&r[2], "hurst") - 0.5).abs() < 1e-12);
}

#[test]
fn csv_layout() {
    let (code, out, _) = call(&["variance", "--model", "fou", "--hurst", "0.3:0.7:0.2", "--t", "4"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("# "));
    let body: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with('#')).collect();
    let header: Vec<&str> = body[0].split(',').collect();
    assert!(header.contains(&"variance") && header.contains(&"std"));
    assert_eq!(body.len(), 1 + 3);
    let i = header.iter().position(|h| *h == "variance").unwrap();
    for row in &body[1..] {
        let cell = row.split(',').nth(i).unwrap();
        let digits = cell.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        let sig = digits.trim_start_matches('0');
        assert_eq!(sig.len(), 17, "{cell}");
        cell.parse::<f64>().unwrap();
    }
}

#[test]
fn csv_round_trips_values() {
    let v = json(&["variance", "--model", "fou", "--hurst", "0.65", "--s", "1", "--t", "4"]);
    let (_, out, _) = call(&["variance", "--model", "fou", "--hurst", "0.65", "--s", "1", "--t", "4"]);
    let body: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    let header: Vec<&str> = body[0].split(',').collect();
    let i = header.iter().position(|h| *h == "variance").unwrap();
    let csv: f64 = body[1].split(',').nth(i).unwrap().parse().unwrap();
    assert_eq!(csv, num(&rows(&v)[0], "variance"));
}

#[test]
fn from_meta_replays_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    for fmt in ["json", "csv"] {
        let first = dir.path().join(format!("first.{fmt}"));
        let second = dir.path().join(format!("second.{fmt}"));
        let args = [
            "price", "--model", "poly", "--hurst", "0.3:0.7:0.4", "--strike", "8:12:4", "--side", "put", "--format", fmt,
        ];
        let mut a = args.to_vec();
        a.extend_from_slice(&["--out", first.to_str().unwrap()]);
        assert_eq!(call(&a).0, 0);
        let (code, _, err) = call(&[
            "price",
            "--from-meta",
            first.to_str().unwrap(),
            "--out",
            second.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    }
    let bad = dir.path().join("first.json");
    assert_eq!(call(&["variance", "--from-meta", bad.to_str().unwrap()]).0, 2);
}

#[test]
fn mean_and_pdf_commands() {
    let v = json(&["mean", "--model", "fou", "--hurst", "0.5", "--s", "0", "--t", "2", "--z0", "1", "--mu", "0"]);
    assert!((num(&rows(&v)[0], "mean") - (-1.0f64).exp()).abs() < 1e-14);
    for model in ["gfou", "fcir", "poly"] {
        let v = json(&["pdf", "--model", model, "--hurst", "0.75", "--t", "3"]);
        let r = rows(&v);
        assert_eq!(r.len(), 401);
        let pts: Vec<(f64, f64)> = r.iter().map(|x| (num(x, "z"), num(x, "density"))).collect();
        let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        assert!((mass - 1.0).abs() < 1e-4, "{model}: {mass}");
    }
}

#[test]
fn price_reports_closed_form_error() {
    let v = json(&["price", "--model", "gfou", "--hurst", "0.5", "--terms-L", "64", "--t", "0", "--T", "3"]);
    let r = &rows(&v)[0];
    assert!((num(r, "closed_form") - 1.0511624260894106).abs() < 1e-12);
    assert!(num(r, "abs_error") < 1e-12);
    assert!(num(r, "parity_residual").abs() < 1e-10);
}

#[test]
fn mc_validate_small_run() {
    let v = json(&[
        "mc-validate", "--model", "fbm", "--hurst", "0.7", "--s", "0", "--t", "1", "--T", "1", "--dt", "0.05", "--paths",
        "2000", "--repeats", "2",
    ]);
    let r = rows(&v);
    let std_row = r.iter().find(|x| x["quantity"] == "std").unwrap();
    assert!(num(std_row, "rel_error_pct") < 5.0);
    assert!((num(std_row, "analytic") - 1.0).abs() < 1e-4);
}

#[test]
fn validation_errors_exit_2() {
    let (code, _, err) = call(&["variance", "--s", "3", "--t", "2"]);
    assert_eq!(code, 2);
    assert!(err.contains("--t"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
    let (code, _, err) = call(&["variance", "--hurst", "1.2"]);
    assert_eq!(code, 2);
    assert!(err.contains("--hurst"), "{err}");
    assert_eq!(call(&["variance", "--hurst", "0.1:0.2"]).0, 2);
    assert_eq!(call(&["variance", "--model", "nope"]).0, 2);
    assert_eq!(call(&["mc-validate", "--paths", "0"]).0, 2);
    assert_eq!(call(&["price", "--strike", "-1"]).0, 2);
    assert_eq!(call(&["bogus"]).0, 2);
}

#[test]
fn non_convergence_exits_3() {
    let (code, _, err) = call(&["variance", "--model", "fou", "--lambda", "20", "--hurst", "0.7", "--max-terms", "2"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fbmcond");
    let ok = Command::new(bin).args(["variance", "--model", "fbm", "--hurst", "0.5"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("std"));
    let bad = Command::new(bin).args(["variance", "--s", "3", "--t", "2"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let nc = Command::new(bin)
        .args(["variance", "--lambda", "20", "--hurst", "0.7", "--max-terms", "2"])
        .output()
        .unwrap();
    assert_eq!(nc.status.code(), Some(3));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    let (code, out, _) = call(&["variance", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rows(&v).len(), 1);
}
