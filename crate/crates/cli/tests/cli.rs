//! Subcommand behavior: exit codes, report shapes, file naming.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_iscore")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) {
    std::fs::write(dir.path_join(name), content).unwrap();
}

trait PathJoin {
    fn path_join(&self, name: &str) -> std::path::PathBuf;
}
impl PathJoin for Path {
    fn path_join(&self, name: &str) -> std::path::PathBuf {
        self.join(name)
    }
}

fn gaussian_csv(n: usize, seed: u64) -> String {
    let mut csv = String::from("a,b\n");
    let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as f64 / (1u64 << 31) as f64 - 0.5
    };
    for _ in 0..n {
        let x = next();
        let y = 0.8 * x + 0.2 * next();
        csv.push_str(&format!("{x},{y}\n"));
    }
    csv
}

fn setup_masked(dir: &Path) {
    write(dir, "in.csv", &gaussian_csv(100, 1));
    let out = run_in(
        dir,
        &[
            "ampute", "--mechanism", "mcar", "--p-miss", "0.2", "--seed", "2", "--in", "in.csv",
            "--out", "masked.csv",
        ],
    );
    assert!(out.status.success());
}

#[test]
fn score_emits_report_and_ci_fields() {
    let dir = tempfile::tempdir().unwrap();
    setup_masked(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "impute", "--method", "sample", "--n-imputations", "2", "--seed", "3", "--in",
            "masked.csv", "--out-prefix", "s_",
        ],
    );
    assert!(out.status.success());
    assert!(dir.path().join("s_001.csv").exists());
    assert!(dir.path().join("s_002.csv").exists());

    let out = run_in(
        dir.path(),
        &[
            "score", "--in", "masked.csv", "--imputations", "s_", "--seed", "4", "--num-proj",
            "8", "--json-out", "plain.json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let plain: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("plain.json")).unwrap())
            .unwrap();
    assert!(plain["score"].is_f64());
    assert!(plain.get("variance").is_none());
    assert_eq!(plain["schema_version"], 1);
    assert_eq!(plain["per_imputation"].as_array().unwrap().len(), 2);

    let out = run_in(
        dir.path(),
        &[
            "score", "--in", "masked.csv", "--imputations", "s_*.csv", "--seed", "4",
            "--num-proj", "8", "--ci", "--b-reps", "6", "--json-out", "ci.json",
        ],
    );
    assert!(out.status.success());
    let ci: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ci.json")).unwrap())
            .unwrap();
    for key in ["variance", "ci_lo", "ci_hi"] {
        assert!(ci[key].is_f64(), "missing {key}");
    }
    // the glob and the prefix spelling see the same files
    assert_eq!(plain["score"], ci["score"]);
}

#[test]
fn coupling_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    setup_masked(dir.path());
    run_in(
        dir.path(),
        &[
            "impute", "--method", "mean", "--n-imputations", "1", "--seed", "3", "--in",
            "masked.csv", "--out-prefix", "m_",
        ],
    );
    // corrupt an observed cell in the completion
    let path = dir.path().join("m_001.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let replaced = format!("424242,{}", lines[1].split_once(',').unwrap().1);
    lines[1] = &replaced;
    std::fs::write(&path, lines.join("\n")).unwrap();

    let out = run_in(
        dir.path(),
        &["score", "--in", "masked.csv", "--imputations", "m_", "--seed", "4"],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row") && stderr.contains("col"), "{stderr}");
}

#[test]
fn parse_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "x,x\n1,2\n");
    let out = run_in(
        dir.path(),
        &[
            "ampute", "--mechanism", "mcar", "--p-miss", "0.2", "--seed", "1", "--in", "bad.csv",
            "--out", "o.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_with_zero_p_miss_reports_nothing_to_score() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "in.csv", &gaussian_csv(60, 2));
    let out = run_in(
        dir.path(),
        &[
            "validate", "--in", "in.csv", "--mechanism", "mcar", "--p-miss", "0", "--seed", "3",
            "--out-prefix", "v",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to score"));
}

#[test]
fn validate_single_method_yields_one_row() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "in.csv", &gaussian_csv(80, 3));
    let out = run_in(
        dir.path(),
        &[
            "validate", "--in", "in.csv", "--mechanism", "mcar", "--p-miss", "0.25", "--seed",
            "4", "--methods", "mean", "--num-proj", "8", "--b-reps", "6",
            "--coverage-imputations", "3", "--out-prefix", "v",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("v.csv")).unwrap();
    let lines: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("method,score,ci_lo,ci_hi,coverage,width_norm,neg_rmse,rank"));
    assert!(lines[1].starts_with("mean,"));
    let json: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap())
            .unwrap();
    assert_eq!(json["methods"].as_array().unwrap().len(), 1);
    assert_eq!(json["methods"][0]["rank"], 1);
    assert!(json["methods"][0]["bucket"].is_string());
    assert_eq!(json["scatter"].as_array().unwrap().len(), 1);
}

#[test]
fn spiral_demo_emits_ten_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "spiral-demo", "--seed", "1", "--n", "150", "--trees-per-proj", "5", "--b-reps",
            "6", "--json-out", "demo.json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    // header plus 2 mechanisms x 5 candidates
    assert_eq!(stdout.trim().lines().count(), 11);
    let json: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("demo.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn missing_imputation_files_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    setup_masked(dir.path());
    let out = run_in(
        dir.path(),
        &["score", "--in", "masked.csv", "--imputations", "nope_", "--seed", "4"],
    );
    assert_eq!(out.status.code(), Some(1));
}
