//! End-to-end checks of the binary: report formats, exit codes, file
//! validation messages, and the truncate/maximal output contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_haarlab")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

fn value_of(report: &str, key: &str) -> f64 {
    for token in report.split_whitespace() {
        if let Some(v) = token.strip_prefix(&format!("{key}=")) {
            return v.parse().unwrap_or(f64::NAN);
        }
    }
    panic!("key {key} missing from report: {report}");
}

#[test]
fn a2_identity_weight_prints_one() {
    let weight = fixtures().join("const_id.json");
    let out = run(&["a2", "--weight", weight.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "a2=1.0");
}

#[test]
fn square_bounds_depth2_fixture() {
    let weight = fixtures().join("depth2_1119.json");
    let out = run(&["square-bounds", "--weight", weight.to_str().unwrap()]);
    assert!(out.status.success());
    let report = stdout(&out);
    assert!((value_of(&report, "c_low") - 1.73030).abs() <= 1e-4, "{report}");
    assert!((value_of(&report, "c_up") - 3.70782).abs() <= 1e-4, "{report}");
}

#[test]
fn wrong_kind_is_invalid_input() {
    let function = fixtures().join("fn_one_d1_depth1.json");
    let out = run(&["a2", "--weight", function.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("kind"), "{}", stderr(&out));
}

#[test]
fn wrong_leaf_count_is_invalid_input() {
    let dir = std::env::temp_dir().join("haarlab-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad_count.json");
    std::fs::write(
        &path,
        r#"{"kind":"weight","dim":1,"depth":2,"leaves":[[1.0],[2.0]]}"#,
    )
    .unwrap();
    let out = run(&["a2", "--weight", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("leaves"), "{}", stderr(&out));
}

#[test]
fn asymmetric_weight_is_invalid_input() {
    let dir = std::env::temp_dir().join("haarlab-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("asym.json");
    std::fs::write(
        &path,
        r#"{"kind":"weight","dim":2,"depth":1,"leaves":[[1.0,0.5,0.1,1.0],[1.0,0.0,0.0,1.0]]}"#,
    )
    .unwrap();
    let out = run(&["a2", "--weight", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("leaves[0]"), "{}", stderr(&out));
}

#[test]
fn non_pd_weight_is_numerical_failure() {
    let dir = std::env::temp_dir().join("haarlab-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("nonpd.json");
    std::fs::write(
        &path,
        r#"{"kind":"weight","dim":1,"depth":1,"leaves":[[1.0],[-2.0]]}"#,
    )
    .unwrap();
    let out = run(&["a2", "--weight", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("positive definite"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_invalid_input() {
    let out = run(&["a2", "--nope", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn truncate_roundtrip_and_bad_level() {
    let dir = std::env::temp_dir().join("haarlab-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let weight = fixtures().join("rotation4_d2.json");
    let out_path = dir.join("truncated.json");
    let out = run(&[
        "truncate",
        "--weight",
        weight.to_str().unwrap(),
        "--n",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = stdout(&out);
    assert!(value_of(&report, "a2_before").is_finite());
    assert!(value_of(&report, "a2_after").is_finite());
    // The written file loads and reports a characteristic.
    let reread = run(&["a2", "--weight", out_path.to_str().unwrap()]);
    assert!(reread.status.success(), "{}", stderr(&reread));

    let bad = run(&[
        "truncate",
        "--weight",
        weight.to_str().unwrap(),
        "--n",
        "0.5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn maximal_two_interval_example() {
    // d = 1 identity weight at depth 1 with f = (1, 0).
    let dir = std::env::temp_dir().join("haarlab-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let wpath = dir.join("id1.json");
    std::fs::write(
        &wpath,
        r#"{"kind":"weight","dim":1,"depth":1,"leaves":[[1.0],[1.0]]}"#,
    )
    .unwrap();
    let fpath = dir.join("f10.json");
    std::fs::write(
        &fpath,
        r#"{"kind":"function","dim":1,"depth":1,"leaves":[[1.0],[0.0]]}"#,
    )
    .unwrap();
    let out = run(&[
        "maximal",
        "--weight",
        wpath.to_str().unwrap(),
        "--function",
        fpath.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = stdout(&out);
    assert_eq!(value_of(&report, "v0"), 1.0, "{report}");
    assert_eq!(value_of(&report, "v1"), 0.5, "{report}");
}

#[test]
fn layout_mismatch_is_invalid_input() {
    let weight = fixtures().join("depth2_1119.json");
    let function = fixtures().join("fn_one_d1_depth1.json");
    let out = run(&[
        "embedding",
        "--weight",
        weight.to_str().unwrap(),
        "--function",
        function.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("depth"), "{}", stderr(&out));
}

#[test]
fn verify_small_config_passes() {
    let out = run(&[
        "verify", "--depth", "3", "--dim", "1", "--seed", "3", "--trials", "50",
    ]);
    assert!(out.status.success(), "{}\n{}", stdout(&out), stderr(&out));
    let report = stdout(&out);
    assert!(report.contains("failed=0"), "{report}");
    assert!(report.lines().filter(|l| l.starts_with("ok ")).count() >= 30);
}

#[test]
fn sweep_csv_header_and_report() {
    let dir = std::env::temp_dir().join("haarlab-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let csv_path = dir.join("sweep_two_value.csv");
    let out = run(&[
        "sweep", "--family", "two_value", "--range", "1.5:8:4:geom", "--depth", "4", "--dim",
        "1", "--seed", "5", "--measure", "a2,square,testing", "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "family,param,depth,dim,a2,c_up,c_low,shift_norm,tsigma_norm,tv_ratio,testing_ratio,runtime_ms"
    );
    assert_eq!(csv.lines().count(), 5);
    // Unmeasured columns are empty.
    let first_row = csv.lines().nth(1).unwrap();
    let cells: Vec<&str> = first_row.split(',').collect();
    assert_eq!(cells[7], "");
    let report = stdout(&out);
    assert!(report.contains("c_up_slope="), "{report}");
    assert!(report.contains("rows=4 failures=0"), "{report}");
}
