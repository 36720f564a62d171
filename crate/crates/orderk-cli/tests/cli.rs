//! Black-box behavior of the command-line surface: exit codes, output
//! formats, manifests, and environment-variable handling.

use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_orderk"));
    for (key, _) in std::env::vars() {
        if key.starts_with("ORDERK_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary launches")
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout parses as JSON")
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .skip(1)
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn rejected_parameters_exit_2() {
    let cases: &[&[&str]] = &[
        &["pmf", "--process", "y"],
        &["pmf", "--process", "y", "--i", "0"],
        &["pmf", "--process", "y", "--i", "2", "--beta", "1"],
        &["pmf", "--process", "z", "--g", "3,2"],
        &["pmf", "--process", "w", "--i", "1", "--f", "stable:0.5"],
        &["simulate", "--process", "w", "--i", "1", "--f", "stable:1.5"],
        &["pmf", "--no-such-flag"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
    }
}

#[test]
fn unsupported_requests_exit_3() {
    let cases: &[&[&str]] = &[
        &["simulate", "--process", "w", "--i", "1", "--f", "nosuch:1"],
        &[
            "hit", "--process", "w", "--i", "1", "--f", "gamma:1.2,0.8", "--k", "10", "--paths",
            "2000",
        ],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(3), "args {args:?}");
    }
}

#[test]
fn pmf_csv_rows_carry_exact_values() {
    let out = run(&[
        "pmf", "--process", "y", "--i", "2", "--lambda", "1", "--t", "1", "--max-n", "10",
        "--format", "csv",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 11, "rows 0..=10");
    // P[no event by t=1] with two unit-rate components is e^{-2}, and the
    // CSV encoding round-trips doubles exactly.
    let p0: f64 = rows[0][1].parse().unwrap();
    assert_eq!(p0.to_bits(), (-2.0f64).exp().to_bits());
}

#[test]
fn json_and_csv_report_identical_numbers() {
    let args = [
        "pmf", "--process", "y", "--i", "3", "--lambda", "0.7", "--t", "1.3", "--max-n", "15",
    ];
    let json = json_of(&run(&[&args[..], &["--format", "json"]].concat()));
    let csv = run(&[&args[..], &["--format", "csv"]].concat());
    let rows = csv_rows(&csv);
    let json_rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), json_rows.len());
    for (row, json_row) in rows.iter().zip(json_rows) {
        for (col, field) in [(1, "prob"), (2, "cumulative"), (3, "tail_bound")] {
            let from_csv: f64 = row[col].parse().unwrap();
            let from_json = json_row[field].as_f64().unwrap();
            assert_eq!(
                from_csv.to_bits(),
                from_json.to_bits(),
                "n={} field {field}",
                row[0]
            );
        }
    }
}

#[test]
fn manifest_records_the_resolved_run() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(&[
        "simulate", "--process", "z", "--g", "2,4", "--paths", "5000", "--seed", "9", "--out",
        dir.path().to_str().unwrap(), "--format", "csv",
    ]);
    assert!(out.status.success());

    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 9);
    assert!(!manifest["tool_version"].as_str().unwrap().is_empty());
    assert!(!manifest["timestamp"].as_str().unwrap().is_empty());
    assert_eq!(manifest["params"]["g"], serde_json::json!([2, 4]));

    // The argv is fully resolved (defaults included) and free of
    // presentation flags, so replaying it cannot depend on the caller's
    // environment.
    let argv: Vec<&str> = manifest["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(argv[0], "simulate");
    for resolved in ["--lambda", "--t", "--mode", "--streams"] {
        assert!(argv.contains(&resolved), "argv should resolve {resolved}");
    }
    for excluded in ["--out", "--format"] {
        assert!(!argv.contains(&excluded), "argv should omit {excluded}");
    }

    // Checksums cover exactly the data files and match their bytes.
    let checksums = manifest["checksums"].as_object().unwrap();
    let mut names: Vec<&str> = checksums.keys().map(String::as_str).collect();
    names.sort_unstable();
    assert_eq!(names, ["histogram.csv", "report.json"]);
    for (name, recorded) in checksums {
        let bytes = std::fs::read(dir.path().join(name)).unwrap();
        let digest = Sha256::digest(&bytes);
        let recomputed: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(recorded.as_str().unwrap(), recomputed, "checksum of {name}");
    }
}

#[test]
fn environment_fills_defaults_and_flags_win() {
    let fetch_lambda = |extra: &[&str]| {
        let mut cmd = bin();
        cmd.args(["pmf", "--process", "y", "--i", "1", "--format", "json"])
            .args(extra)
            .env("ORDERK_LAMBDA", "2");
        let out = cmd.output().expect("binary launches");
        let doc = json_of(&out);
        (
            doc["params"]["lambda"].as_f64().unwrap(),
            doc["mean"].as_f64().unwrap(),
        )
    };

    let (lambda, mean) = fetch_lambda(&[]);
    assert_eq!(lambda, 2.0);
    assert!((mean - 2.0).abs() < 1e-6, "single-jump mean is lambda*t");

    let (lambda, mean) = fetch_lambda(&["--lambda", "3"]);
    assert_eq!(lambda, 3.0, "an explicit flag overrides the environment");
    assert!((mean - 3.0).abs() < 1e-6);
}

#[test]
fn weighted_parity_gaps_have_zero_mass() {
    let doc = json_of(&run(&[
        "pmf", "--process", "z", "--g", "2,4", "--max-n", "9", "--format", "json",
    ]));
    for row in doc["rows"].as_array().unwrap() {
        let n = row["n"].as_u64().unwrap();
        if n % 2 == 1 {
            assert_eq!(row["prob"].as_f64(), Some(0.0), "odd totals are unreachable");
        }
    }
}

#[test]
fn hit_reports_all_three_estimates() {
    let doc = json_of(&run(&[
        "hit", "--process", "y", "--i", "1", "--k", "2", "--paths", "2000", "--format", "json",
    ]));
    // A single-jump stream passes through every level.
    assert_eq!(doc["closed_form_value"].as_f64(), Some(1.0));
    assert_eq!(doc["recursion_value"].as_f64(), Some(1.0));
    assert_eq!(doc["closed_form_agrees_with_recursion"], true);
    assert_eq!(doc["recursion_agrees_with_mc"], true);
    assert_eq!(doc["params"]["k"], 2);
}

#[test]
fn replay_requires_a_readable_manifest() {
    let out = run(&["replay", "--manifest", "/nonexistent/manifest.json", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}
