//! End-to-end runs of the installed binary: report content on the bundled
//! panel, exit-code contract, and byte determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/panel_judgements.csv")
}

fn concord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concord"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn analyze_reports_both_row_conventions() {
    let input = fixture();
    let input = input.to_str().unwrap();

    let retained = stdout(&concord(&["analyze", "--input", input]));
    assert!(retained.contains("retained 24 of 30"));
    assert!(retained.contains("Q = 13.801 (df = 8), p = 0.087 [asymptotic]"));
    assert!(retained.contains("do not reject"));
    assert!(retained.contains("N = 155"));

    let leading = stdout(&concord(&[
        "analyze", "--input", input, "--rows", "leading", "--method", "asymptotic",
    ]));
    assert!(leading.contains("Q = 8.703 (df = 8), p = 0.368 [asymptotic]"));
    assert!(leading.contains("N = 144"));
}

#[test]
fn analyze_json_carries_full_precision() {
    let input = fixture();
    let out = stdout(&concord(&[
        "analyze",
        "--input",
        input.to_str().unwrap(),
        "--format",
        "json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["panel"]["n_items"], 30);
    assert_eq!(v["retention"]["retained"].as_array().unwrap().len(), 24);
    assert_eq!(v["agreement_matrix"]["grand_total"], 155);
    assert!((v["test"]["q"].as_f64().unwrap() - 13.8012).abs() < 1e-3);
    assert!((v["test"]["p_value"].as_f64().unwrap() - 0.0871).abs() < 1e-3);
    assert_eq!(v["reject"], false);
    assert_eq!(v["condition"]["kind"], "concordance-index");
}

#[test]
fn analyze_handles_degenerate_and_empty_panels() {
    let dir = tempfile::tempdir().unwrap();

    let unanimous = dir.path().join("unanimous.csv");
    std::fs::write(&unanimous, "item,e1,e2,e3\n1,A,A,A\n").unwrap();
    let out = stdout(&concord(&["analyze", "--input", unanimous.to_str().unwrap()]));
    assert!(out.contains("p = 1.000"));
    assert!(out.contains("degenerate"));

    let split = dir.path().join("split.csv");
    std::fs::write(&split, "item,e1,e2\n1,A,B\n2,B,A\n").unwrap();
    let out = stdout(&concord(&["analyze", "--input", split.to_str().unwrap()]));
    assert!(out.contains("retained 0 of 2"));
    assert!(out.contains("test skipped"));
}

#[test]
fn exit_codes_separate_read_errors_from_bad_requests() {
    let input = fixture();
    let input = input.to_str().unwrap();

    let missing = concord(&["analyze", "--input", "no-such-file.csv"]);
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let mangled = dir.path().join("mangled.csv");
    std::fs::write(&mangled, "item,e1,e2\n1,A\n").unwrap();
    let parse = concord(&["analyze", "--input", mangled.to_str().unwrap()]);
    assert_eq!(parse.status.code(), Some(2));

    let bad_ci = concord(&["analyze", "--input", input, "--ci", "150"]);
    assert_eq!(bad_ci.status.code(), Some(3));

    let bad_bounds = concord(&["subgroups", "--input", input, "--min-size", "10"]);
    assert_eq!(bad_bounds.status.code(), Some(3));

    let bad_builtin = concord(&["power", "--builtin", "no-such-scenario"]);
    assert_eq!(bad_builtin.status.code(), Some(3));

    let no_source = concord(&["power"]);
    assert_eq!(no_source.status.code(), Some(3));
}

#[test]
fn subgroup_survey_matches_published_ranking() {
    let input = fixture();
    let out = stdout(&concord(&[
        "subgroups",
        "--input",
        input.to_str().unwrap(),
        "--rows",
        "leading",
        "--method",
        "asymptotic",
        "--top",
        "10",
    ]));
    assert!(out.contains("subsets: 130 (sizes 6..=8 plus the full panel), rejections at alpha 0.05: 13"));
    let lines: Vec<&str> = out.lines().collect();
    let first_row = lines
        .iter()
        .position(|l| l.starts_with("specialists"))
        .unwrap()
        + 1;
    assert!(lines[first_row].starts_with("e2+e3+e5+e6+e7+e8"));
    assert!(lines[first_row].ends_with("0.778  0.978"));
    assert_eq!(lines.last().unwrap(), &"showing 10 of 130");
}

#[test]
fn subgroup_csv_has_one_row_per_subset() {
    let input = fixture();
    let out = stdout(&concord(&[
        "subgroups",
        "--input",
        input.to_str().unwrap(),
        "--no-full",
        "--format",
        "csv",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 130);
    assert_eq!(lines[0], "specialists,q,p_value,n_retained");
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
}

#[test]
fn power_builtin_row_is_close_to_nominal() {
    let out = stdout(&concord(&[
        "power",
        "--builtin",
        "scenario-1",
        "--replicates",
        "2000",
        "--seed",
        "42",
        "--rows",
        "leading",
        "--format",
        "csv",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "scenario-1");
    let power: f64 = fields[1].parse().unwrap();
    assert!((power - 0.9931).abs() < 0.03, "power {power}");
    assert_eq!(fields[4], "2000");
    assert_eq!(fields[5], "42");
}

#[test]
fn power_scenario_file_and_worker_count_leave_bytes_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenarios.json");
    std::fs::write(
        &path,
        r#"[
            {"name": "tiny", "n_items": 10, "n_dims": 3,
             "specialists": [{"p_correct": 0.8, "error_split": [0.5, 0.5]},
                             {"p_correct": 0.8, "error_split": [0.5, 0.5]},
                             {"p_correct": 0.8, "error_split": [0.5, 0.5]},
                             {"p_correct": 0.8, "error_split": [0.5, 0.5]}]}
        ]"#,
    )
    .unwrap();
    let base = [
        "power",
        "--scenario",
        path.to_str().unwrap(),
        "--replicates",
        "2000",
        "--seed",
        "9",
        "--format",
        "json",
    ];
    let one = stdout(&concord(&[&base[..], &["--workers", "1"]].concat()));
    let four = stdout(&concord(&[&base[..], &["--workers", "4"]].concat()));
    assert_eq!(one, four);
    let v: serde_json::Value = serde_json::from_str(&one).unwrap();
    assert_eq!(v["estimates"][0]["scenario"], "tiny");
    assert_eq!(v["estimates"][0]["seed"], 9);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let input = fixture();
    let input = input.to_str().unwrap();
    let survey = [
        "subgroups", "--input", input, "--method", "asymptotic", "--format", "json",
    ];
    assert_eq!(stdout(&concord(&survey)), stdout(&concord(&survey)));
    let mc = [
        "analyze", "--input", input, "--method", "mc", "--mc-reps", "2000", "--seed", "5",
    ];
    assert_eq!(stdout(&concord(&mc)), stdout(&concord(&mc)));
}
