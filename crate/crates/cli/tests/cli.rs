//! End-to-end checks of the binary: artifact schemas, determinism, exit
//! codes, and the documented input surfaces.

use std::process::Command;

fn tbg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tbg"))
}

fn run_ok(args: &[&str]) -> String {
    let out = tbg().args(args).output().expect("spawn tbg");
    assert!(
        out.status.success(),
        "tbg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 output")
}

#[test]
fn magic_json_golden_value_and_schema() {
    let text = run_ok(&["magic", "--n", "8", "--count", "8", "--threads", "1"]);
    let doc: serde_json::Value = serde_json::from_str(&text).expect("valid JSON artifact");
    assert_eq!(doc["meta"]["tool"], "tbg");
    assert_eq!(doc["meta"]["command"], "magic");
    assert_eq!(doc["meta"]["config"]["N"], 8);
    let alphas = doc["resonant_set"]["alphas"].as_array().unwrap();
    assert!(!alphas.is_empty());
    let best = alphas
        .iter()
        .filter(|e| e["im"].as_f64().unwrap().abs() < 1e-6 && e["re"].as_f64().unwrap() > 0.0)
        .map(|e| e["re"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(
        (best - 0.585663558389558).abs() < 1e-9,
        "first magic value via CLI: {best}"
    );
}

#[test]
fn identical_config_gives_identical_bytes() {
    let args = [
        "magic", "--n", "6", "--count", "6", "--threads", "1", "--format", "csv",
    ];
    let a = run_ok(&args);
    let b = run_ok(&args);
    assert_eq!(a, b, "artifact bytes differ between identical runs");
    assert!(a.starts_with("# tool=tbg"));
    assert!(a.lines().nth(1).unwrap().starts_with("re,im,mult"));
}

#[test]
fn validation_errors_exit_2() {
    // momentum on the dual lattice
    let out = tbg()
        .args(["magic", "--n", "4", "--count", "4", "--k", "0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // unsupported trace power
    let out = tbg()
        .args(["trace-check", "--power", "5", "--n", "8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // clap-level usage error
    let out = tbg().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn potential_file_round_trip() {
    let dir = std::env::temp_dir();
    let path = dir.join("tbg_test_potential.json");
    std::fs::write(&path, r#"{"coeffs": {"1": [1.0, 0.0], "-2": [-1.96, 0.0]}}"#).unwrap();
    let text = run_ok(&[
        "bracket-field",
        "--potential-file",
        path.to_str().unwrap(),
        "--grid",
        "4",
        "--window=-1:1:-1:1",
        "--format",
        "csv",
        "--threads",
        "1",
    ]);
    let rows: Vec<&str> = text.lines().collect();
    // comment + header + 16 grid rows
    assert_eq!(rows.len(), 18);
    assert!(rows[1].starts_with("x1,x2,field"));
    // config echo carries the parsed coefficients
    assert!(rows[0].contains("\"-2\""));
    let _ = std::fs::remove_file(&path);
}

#[test]
fn bad_potential_file_is_rejected() {
    let dir = std::env::temp_dir();
    let path = dir.join("tbg_test_bad_potential.json");
    std::fs::write(&path, r#"{"coeffs": {"2": [1.0, 0.0]}}"#).unwrap();
    let out = tbg()
        .args([
            "bracket-field",
            "--potential-file",
            path.to_str().unwrap(),
            "--grid",
            "3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_file(&path);
}

#[test]
fn eigenfunction_csv_shape() {
    let text = run_ok(&[
        "eigenfunction",
        "--alpha",
        "0.5",
        "--n",
        "6",
        "--grid",
        "6",
        "--format",
        "csv",
        "--threads",
        "1",
    ]);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2 + 36);
    assert!(rows[1].starts_with("x1,x2,log_abs_u"));
}

#[test]
fn bands_and_squeeze_artifacts() {
    let text = run_ok(&[
        "bands", "--alpha", "0", "--n", "4", "--count", "2", "--k", "0.5,0",
        "--format", "csv", "--threads", "1",
    ]);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2 + 2);
    assert!(rows[1].starts_with("alpha,k1,k2,j,E"));

    let text = run_ok(&[
        "squeeze-check", "--alphas", "0,1", "--n", "6", "--threads", "1",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rows = doc["squeeze_check"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(doc["squeeze_check"]["hypothesis_holds"], true);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir();
    let path = dir.join("tbg_test_out.json");
    let _ = run_ok(&[
        "resolvent-scan",
        "--alpha-range",
        "0.2:0.4:0.1",
        "--n",
        "4",
        "--threads",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&path).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["resolvent_scan"].as_array().unwrap().len(), 3);
    let _ = std::fs::remove_file(&path);
}

#[test]
fn certify_probe_reproduces_reference_size() {
    let text = run_ok(&[
        "certify", "--delta", "0.1", "--target", "1", "--probe-n", "16",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["certificate"]["n_required"], 21);
    assert_eq!(doc["certificate"]["status"], "ProbeOnly");
    assert!(doc["certificate"]["trusted_kernel"].as_str().unwrap().len() > 10);
}
