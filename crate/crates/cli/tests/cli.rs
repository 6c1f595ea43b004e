use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn bochner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bochner")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn rp_on_sphere4() {
    let out = bochner(&["rp", "--input", &fixture("sphere4.json"), "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["result"]["min_eigenvalue"].as_f64(), Some(4.0));
    assert_eq!(v["result"]["structure"]["passes"], Value::Bool(true));
}

#[test]
fn rp_on_product_is_three_on_the_diagonal() {
    let out = bochner(&["rp", "--input", &fixture("product_a1.json"), "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let rows = v["result"]["operator"]["matrix"].as_array().unwrap();
    assert_eq!(rows.len(), 20);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[i].as_f64(), Some(3.0));
    }
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(bochner(&["rp", "--input", &fixture("malformed.json"), "--p", "2"]).status.code(), Some(2));
    assert_eq!(bochner(&["rp", "--input", "/nonexistent.json", "--p", "2"]).status.code(), Some(2));
    assert_eq!(
        bochner(&["pinch", "--input", &fixture("sphere6.json"), "--p", "1", "--seed", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(bochner(&["ssp", "--input", &fixture("torus_noseed.json")]).status.code(), Some(2));
    assert_eq!(bochner(&["rp", "--p", "2"]).status.code(), Some(2));
}

#[test]
fn invalid_tensor_exits_three() {
    let out = bochner(&["rp", "--input", &fixture("bad_bianchi.json"), "--p", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn underflow_exits_four() {
    let out = bochner(&["ssp", "--input", &fixture("torus_underflow.json")]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shorter horizon"));
}

#[test]
fn pinch_verdicts() {
    let run = |file: &str, p: &str| {
        let out = bochner(&["pinch", "--input", &fixture(file), "--p", p, "--seed", "3", "--restarts", "6"]);
        assert_eq!(out.status.code(), Some(0));
        json_of(&out)
    };
    assert_eq!(run("product_a1.json", "3")["result"]["report"]["pinched"], Value::Bool(true));
    assert_eq!(run("product_a1.json", "2")["result"]["report"]["pinched"], Value::Bool(false));
    let s6 = run("sphere6.json", "3");
    assert_eq!(s6["result"]["report"]["pinched"], Value::Bool(true));
    assert!((s6["result"]["report"]["C"].as_f64().unwrap() - 33.0 / 35.0).abs() < 1e-15);
}

#[test]
fn example_reports() {
    let out = bochner(&["example", "--a", "1", "--restarts", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["result"]["all_pass"], Value::Bool(true));
    let out = bochner(&["example", "--a", "3.9", "--restarts", "2"]);
    let v = json_of(&out);
    assert!((v["result"]["report"]["min_eigenvalue"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    let out = bochner(&["example", "--a", "5", "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["result"]["report"]["positive"], Value::Bool(false));
    assert_eq!(v["params"]["seed"].as_u64(), Some(0));
}

#[test]
fn ssp_verdicts_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let out = bochner(&["ssp", "--input", &fixture("torus_const.json"), "--N", "10", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!((v["result"]["rate"].as_f64().unwrap() + 0.5).abs() < 1e-9);
    assert_eq!(v["result"]["ssp_verdict"], "positive");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,mean,stderr\n"));

    let out = bochner(&["ssp", "--input", &fixture("torus_negative.json"), "--N", "10"]);
    assert_eq!(json_of(&out)["result"]["ssp_verdict"], "negative");

    let out = bochner(&["ssp", "--input", &fixture("sphere2_affine.json"), "--N", "400", "--T", "4", "--dt", "0.01"]);
    let v = json_of(&out);
    assert_eq!(v["result"]["ssp_verdict"], "positive");
    let bound = v["result"]["lambda0_lower_bound"]["bound"].as_f64().unwrap();
    let se = v["result"]["lambda0_lower_bound"]["stderr"].as_f64().unwrap();
    assert!(bound > 0.5 - 3.0 * se && bound < 1.5 + 3.0 * se, "{bound} ± {se}");
}

#[test]
fn wflow_on_sphere() {
    let out = bochner(&["wflow", "--input", &fixture("sphere4_wflow.json"), "--N", "4", "--T", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["result"]["dominated"], Value::Bool(true));
    assert!((v["result"]["max_ratio"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn hodge_examples() {
    let out = bochner(&["hodge", "--input", &fixture("triangle_cycle.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    for q in 0..2 {
        assert!((v["result"]["report"]["degrees"][q]["lambda1"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    }
    let out = bochner(&["hodge", "--input", &fixture("filled_triangle.json")]);
    let v = json_of(&out);
    assert!((v["result"]["report"]["degrees"][1]["lambda1"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(v["result"]["report"]["degrees"][1]["betti"].as_u64(), Some(0));
    assert_eq!(bochner(&["hodge", "--vertices", "6", "--seed", "2"]).status.code(), Some(0));
    assert_eq!(bochner(&["hodge", "--input", &fixture("malformed.json")]).status.code(), Some(2));
}

#[test]
fn lemma32_passes() {
    let out = bochner(&["lemma32", "--n", "6"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["result"]["passes"], Value::Bool(true));
}
