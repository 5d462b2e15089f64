use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multistate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .trim()
        .parse()
        .unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn delta_of_bundled_model() {
    let out = run(&["delta", fixture("dread_disease.model").to_str().unwrap()]);
    assert!(out.status.success());
    let rows: Vec<String> = stdout(&out)
        .lines()
        .skip(1)
        .take(6)
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect();
    assert_eq!(rows, ["1 0", "2 1", "3 1", "4 2", "5 3", "6 4"]);
}

#[test]
fn unreachable_state_prints_inf() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        &dir,
        "m.model",
        "states 5\ntransition 1 2\ntransition 3 4\n",
    );
    let out = run(&["delta", &model, "--format", "csv"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("\n5,inf\n"));
    assert!(stdout(&out).contains("\n3,inf\n"));
}

#[test]
fn self_transition_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        &dir,
        "m.model",
        "states 3\ntransition 1 2\ntransition 2 2\n",
    );
    let out = run(&["validate", &model]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("self-transition at state 2"));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = run(&["validate", "/nonexistent/model"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_error_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(&dir, "m.model", "states 3\ntransition 1 x\n");
    let out = run(&["validate", &model]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("m.model:2:"), "{}", stderr(&out));
}

#[test]
fn missing_table_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        &dir,
        "m.model",
        "states 3\ntransition 1 2\ntransition 1 3\n",
    );
    let table = write(&dir, "t.csv", "k,l_1,d_1_2\n0,100,1\n1,99,1\n");
    let out = run(&["table", "check", "--model", &model, "--table", &table]);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("d_1_3"));
}

#[test]
fn single_premium_smoke() {
    let out = run(&["premium", "--single", "--lambda", "0.5", "--rate", "0.01"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let line = text
        .lines()
        .find(|l| l.starts_with("single premium"))
        .unwrap();
    let digits = line.split('.').nth(1).unwrap();
    assert_eq!(digits.len(), 5);
}

#[test]
fn period_premium_breakdown() {
    let out = run(&[
        "premium",
        "--period",
        "--m",
        "25",
        "--pay-states",
        "1,2,3,4,5,6",
        "--lambda",
        "0.5",
        "--rate",
        "0.01",
        "--precision",
        "10",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let p = value(&text, "period premium");
    let num = value(&text, "numerator");
    let den = value(&text, "denominator");
    assert!((p * den - num).abs() < 1e-8);
    assert!(value(&text, "residual").abs() < 1e-12);
}

#[test]
fn period_requires_term_and_pay_states() {
    let out = run(&["premium", "--period", "--lambda", "0.5", "--rate", "0.01"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exactly_one_discount_source() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(&dir, "m.txt", "1");
    let out = run(&[
        "premium",
        "--lambda",
        "0.5",
        "--rate",
        "0.01",
        "--discount-file",
        &m,
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["premium", "--lambda", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn discount_file_matches_rate() {
    let dir = tempfile::tempdir().unwrap();
    let factors: Vec<String> = (0..=25).map(|k| format!("{}", 1.01f64.powi(-k))).collect();
    let m = write(&dir, "m.txt", &factors.join(","));
    let by_file = run(&[
        "premium",
        "--case",
        "1",
        "--discount-file",
        &m,
        "--precision",
        "9",
    ]);
    let by_rate = run(&[
        "premium",
        "--case",
        "1",
        "--rate",
        "0.01",
        "--precision",
        "9",
    ]);
    assert!(by_file.status.success(), "{}", stderr(&by_file));
    let a = value(&stdout(&by_file), "single premium");
    let b = value(&stdout(&by_rate), "single premium");
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn doubled_premium_gives_negative_single_premium_residual() {
    let base = run(&[
        "premium",
        "--single",
        "--case",
        "1",
        "--rate",
        "0.01",
        "--precision",
        "12",
    ]);
    let pi = value(&stdout(&base), "single premium");
    let out = run(&[
        "check",
        "--single",
        "--case",
        "1",
        "--rate",
        "0.01",
        "--precision",
        "12",
        "--premium",
        &format!("{}", 2.0 * pi),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!((value(&stdout(&out), "residual") + pi).abs() < 1e-9);
}

#[test]
fn annuity_at_time_zero_is_one() {
    let out = run(&[
        "annuity", "--rate", "0.01", "--state", "1", "--from", "0", "--to", "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(value(&stdout(&out), "annuity"), 1.0);
}

#[test]
fn case3_last_row() {
    let out = run(&[
        "cashflow",
        "case",
        "--id",
        "3",
        "--n",
        "25",
        "--format",
        "csv",
        "--precision",
        "0",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(
        text.lines().next().unwrap(),
        "k,c_1,c_2,c_3,c_4,c_5,c_6,c_7,c_8,c_9,c_10"
    );
    assert_eq!(text.lines().last().unwrap(), "25,1,1,2,1,1,1,1,0,1,0");
    assert_eq!(text.lines().count(), 27);
}

#[test]
fn cashflow_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(&dir, "c.flow", "flow 3 1 1 0.25\nflow 3 1 2 0.25\n");
    let out = run(&[
        "cashflow",
        "file",
        &spec,
        "--n",
        "2",
        "--states",
        "3",
        "--format",
        "csv",
        "--precision",
        "2",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Vec<String> = stdout(&out).lines().skip(1).map(str::to_owned).collect();
    assert_eq!(
        rows,
        ["0,0.00,0.00,0.00", "1,0.00,0.00,0.50", "2,0.00,0.00,0.25"]
    );
}

#[test]
fn lambda_outside_unit_interval_is_rejected() {
    let out = run(&["cashflow", "accel", "--lambda", "1.5", "--n", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("lambda"));
}

#[test]
fn extend_base_model_reproduces_bundled_model() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("ext.model");
    let out = run(&[
        "extend",
        fixture("dread_disease_base.model").to_str().unwrap(),
        "-o",
        target.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let attached: Vec<String> = stdout(&out).lines().skip(1).map(str::to_owned).collect();
    assert_eq!(attached, ["3,1", "7,1", "9,1"]);
    let written = run(&["delta", target.to_str().unwrap(), "--format", "csv"]);
    let bundled = run(&[
        "delta",
        fixture("dread_disease.model").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(stdout(&written), stdout(&bundled));
}

#[test]
fn valuation_refuses_model_with_lump_sums() {
    let out = run(&[
        "premium",
        "--rate",
        "0.01",
        "--lambda",
        "0.5",
        "--model",
        fixture("dread_disease_base.model").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("extend"));
}

#[test]
fn demo_accel_shape_and_dash() {
    let out = run(&["demo", "accel"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("# SYNTHETIC"));
    let table: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            l.split("  ")
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect()
        })
        .collect();
    assert_eq!(table.len(), 6);
    assert!(table.iter().all(|r| r.len() == 9));
    assert_eq!(&table[5][7..], ["—", "—"]);
    assert!(table[1..5].iter().all(|r| !r.contains(&"—")));
}

#[test]
fn reports_are_byte_identical() {
    for args in [
        &["demo", "case2"][..],
        &[
            "simulate", "--rate", "0.01", "--case", "1", "--paths", "2000", "--seed", "7",
        ][..],
    ] {
        assert_eq!(run(args).stdout, run(args).stdout);
    }
}

#[test]
fn simulation_agrees_with_matrix_value() {
    let out = run(&[
        "simulate",
        "--rate",
        "0.01",
        "--lambda",
        "0.5",
        "--period",
        "--m",
        "25",
        "--pay-states",
        "1",
        "--paths",
        "20000",
        "--precision",
        "8",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(value(&text, "z").abs() < 4.0);
}

#[test]
fn distribution_rows_sum_to_one() {
    let out = run(&[
        "dist",
        "--format",
        "csv",
        "--precision",
        "15",
        "--sex",
        "male",
    ]);
    assert!(out.status.success());
    for line in stdout(&out).lines().skip(1) {
        let sum: f64 = line
            .split(',')
            .skip(1)
            .map(|v| v.parse::<f64>().unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
