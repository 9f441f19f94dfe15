use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn samples(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("../../samples");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stathyper"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn geom_at_reports_metric_and_weights() {
    let out = run(&["geom", "at", &samples("expr.json"), "--point", "0.2,-0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let w: Vec<f64> = serde_json::from_value(v["w"].clone()).unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    let g: Vec<Vec<f64>> = serde_json::from_value(v["g"].clone()).unwrap();
    let n: Vec<f64> = serde_json::from_value(v["N"].clone()).unwrap();
    // g = I + ∇F∇Fᵀ and N ∝ (−∇F, 1)
    let grad: Vec<f64> = n[..2].iter().map(|c| -c / n[2]).collect();
    for i in 0..2 {
        for k in 0..2 {
            let expect = if i == k { 1.0 } else { 0.0 } + grad[i] * grad[k];
            assert!((g[i][k] - expect).abs() < 1e-12);
        }
    }
    assert!(v["S"].as_f64().unwrap() > 0.0);
}

#[test]
fn negative_point_coordinates_parse() {
    let out = run(&["geom", "at", &samples("affine.json"), "--point", "-0.5,-1e-3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["x"][0].as_f64(), Some(-0.5));
}

#[test]
fn deform_report_from_file_and_literals() {
    let file = run(&[
        "deform", "report", "--model", &samples("expr.json"), "--point", "0.2,-0.1",
        "--deformation", &samples("deformation.json"),
    ]);
    assert_eq!(file.status.code(), Some(0));
    let v = json(&file);
    for key in ["delta_w", "delta_S", "delta_g", "delta_Omega", "delta_K", "delta_R", "delta_scalar_R", "classification"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let dw: Vec<f64> = serde_json::from_value(v["delta_w"].clone()).unwrap();
    assert!(dw.iter().sum::<f64>().abs() < 1e-14);

    let constant = run(&[
        "deform", "report", "--model", &samples("affine.json"), "--point", "0,0", "--delta-f", "0.7,0.7,0.7",
    ]);
    assert_eq!(constant.status.code(), Some(0));
    let v = json(&constant);
    assert_eq!(v["classification"], "reversible");
    assert!(v["delta_w"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
}

#[test]
fn determinant_paths_agree() {
    let base = ["deform", "report", "--model", &samples("expr.json"), "--point", "0.3,0.4", "--delta-f", "0.1,-0.2,0.05"];
    let a = json(&run(&[&base[..], &["--det-path", "adjugate"]].concat()));
    let b = json(&run(&[&base[..], &["--det-path", "inverse"]].concat()));
    let da = a["delta_det_g"].as_f64().unwrap();
    let db = b["delta_det_g"].as_f64().unwrap();
    assert!((da - db).abs() <= 1e-12 * da.abs().max(1.0));
}

#[test]
fn as_printed_changes_curvature_variation_only() {
    let base = ["deform", "report", "--model", &samples("expr.json"), "--point", "0.3,0.4", "--delta-f", "0.1,-0.2,0.05"];
    let fixed = json(&run(&base));
    let printed = json(&run(&[&base[..], &["--as-printed"]].concat()));
    assert_eq!(fixed["delta_S"], printed["delta_S"]);
    assert_eq!(fixed["delta_Omega"], printed["delta_Omega"]);
    assert_ne!(fixed["delta_K"], printed["delta_K"]);
    assert_eq!(printed["coefficients"], "as-printed");
}

#[test]
fn conflicting_deformation_sources_exit_2() {
    let out = run(&[
        "deform", "report", "--model", &samples("affine.json"), "--point", "0,0",
        "--deformation", &samples("shift.json"), "--delta-f", "1,2,3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_deformation_exits_2() {
    let out = run(&["deform", "report", "--model", &samples("affine.json"), "--point", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replicator_csv_stays_on_simplex() {
    let out = run(&["replicator", "run", "--model", &samples("affine.json"), "--point", "0,0", "--steps", "25", "--shift", "auto"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv(&out);
    assert_eq!(rows[0], ["step", "w_1", "w_2", "w_3", "S"]);
    assert_eq!(rows.len(), 27);
    for row in &rows[1..] {
        let w: Vec<f64> = row[1..4].iter().map(|s| s.parse().unwrap()).collect();
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn replicator_rejects_zero_steps() {
    let out = run(&["replicator", "run", "--model", &samples("affine.json"), "--point", "0,0", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_closed_form_matches_quadrature() {
    let out = run(&["sweep", "s2", "--c-min", "0.5", "--c-max", "3", "--steps", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv(&out);
    assert_eq!(rows[0], ["c", "closed", "quadrature", "asymptote", "ratio"]);
    assert_eq!(rows.len(), 7);
    for row in &rows[1..] {
        let v: Vec<f64> = row.iter().map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - v[2]).abs() <= 1e-8 * v[1].abs().max(1.0), "{row:?}");
        assert!((v[4] - v[1] / v[3]).abs() < 1e-15 * v[4].abs().max(1.0));
    }
}

#[test]
fn potential_verify_echoes_seed() {
    let out = run(&["potential", "verify", "--m", "3", "--seed", "0x2A", "--steps", "400"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["seed"], 42);
    assert_eq!(v["passed"], true);
    let again = json(&run(&["potential", "verify", "--m", "3", "--seed", "42", "--steps", "400"]));
    assert_eq!(v, again);
}

#[test]
fn potential_verify_rejects_empty() {
    assert_eq!(run(&["potential", "verify", "--m", "0"]).status.code(), Some(2));
}

#[test]
fn volume_check_is_reproducible() {
    let args = ["volume", "check", "--region", &samples("region.json"), "--samples", "100000", "--seed", "7"];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    let v = json(&a);
    assert_eq!(v["seed"], 7);
    let diff = (v["delta_S"].as_f64().unwrap() - v["volume_times"].as_f64().unwrap()).abs();
    assert!(diff <= 3.0 * v["mc_sigma"].as_f64().unwrap());
    assert_eq!(v, json(&run(&args)));
}

#[test]
fn validation_failures_exit_2() {
    assert_eq!(run(&["geom", "at", "no-such-file.json", "--point", "0,0"]).status.code(), Some(2));
    assert_eq!(run(&["geom", "at", &samples("affine.json"), "--point", "0"]).status.code(), Some(2));
    assert_eq!(run(&["geom", "at", &samples("affine.json"), "--point", "0,x"]).status.code(), Some(2));
    assert_eq!(run(&["volume", "check", "--region", &samples("affine.json")]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "s2", "--c-min", "2", "--c-max", "1", "--steps", "3"]).status.code(), Some(2));
}

#[test]
fn verify_all_quick_passes() {
    let out = run(&["verify-all"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["seed"], 0xC0FFEE);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 11);
}

#[test]
fn super_ideal_metric_determinant_at_origin() {
    let v = json(&run(&["geom", "at", &samples("super_ideal.json"), "--point", "0,0"]));
    assert!((v["det_g"].as_f64().unwrap() - 1.5).abs() < 1e-15);
}

#[test]
fn verify_all_with_explicit_seed() {
    let out = run(&["verify-all", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["seed"], 1);
}

#[test]
fn sweep_reproduces_ratio_curve() {
    let out = run(&["sweep", "s2", "--c-min", "0.5", "--c-max", "10", "--steps", "20"]);
    let rows = csv(&out);
    assert_eq!(rows.len(), 21);
    let last: f64 = rows[20][4].parse().unwrap();
    assert!((last - 1.0).abs() <= 0.01);
    assert!(String::from_utf8_lossy(&out.stdout).ends_with('\n'));
    assert!(!out.stdout.contains(&b'\r'));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let volume = ["volume", "check", "--region", &samples("region.json"), "--samples", "50000", "--seed", "3"];
    assert_eq!(run(&volume).stdout, run(&volume).stdout);
    let all = ["verify-all", "--seed", "9"];
    assert_eq!(run(&all).stdout, run(&all).stdout);
}
