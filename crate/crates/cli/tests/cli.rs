use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/v1").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheetgrade"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn task() -> PathBuf {
    data("grades/task.json")
}

fn check(submission: &Path, extra: &[&str]) -> Output {
    let task = task();
    let mut args = vec!["check", path(&task), path(submission)];
    args.extend_from_slice(extra);
    run(&args)
}

fn schema() -> jsonschema::Validator {
    let text = fs::read_to_string(data("report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_schema(json: &str) {
    let value: serde_json::Value = serde_json::from_str(json).unwrap();
    let errors: Vec<String> = schema().iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn check_levels_and_exit_codes() {
    let o = check(&data("grades/submission.wb"), &["--level", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "task grades: FAIL\nThe formulas of cells D3, C6 are incorrect.\n");
    let o = check(&data("grades/solution.wb"), &["--level", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "task grades: PASS\nThe spreadsheet is correct.\n");
    let o = check(&data("grades/missing.wb"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(run(&["check"]).status.code(), Some(3));
    let o = check(&data("grades/submission.wb"), &["--level", "9"]);
    assert_eq!(o.status.code(), Some(3));
    let o = check(&data("grades/submission.wb"), &["--abs-tol", "-1"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn tolerance_override_changes_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("grades/solution.wb")).unwrap().replace("\"B3\": 92", "\"B3\": 92.004");
    let sub = dir.path().join("close.wb");
    fs::write(&sub, text).unwrap();
    assert_eq!(check(&sub, &[]).status.code(), Some(1));
    assert_eq!(check(&sub, &["--abs-tol", "0.01"]).status.code(), Some(0));
}

#[test]
fn json_reports_match_schema_and_repeat_exactly() {
    for (file, level, force) in [("submission.wb", "6", false), ("submission.wb", "7", true), ("solution.wb", "7", false)] {
        let mut extra = vec!["--format", "json", "--level", level];
        if force {
            extra.push("--force-quality");
        }
        let first = check(&data(&format!("grades/{file}")), &extra);
        let second = check(&data(&format!("grades/{file}")), &extra);
        assert_eq!(first.stdout, second.stdout);
        assert_schema(&stdout(&first));
    }
    let o = check(&data("grades/submission.wb"), &["--format", "json", "--level", "6"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["diagnoses"][0]["cell"], "D3");
    assert_eq!(v["diagnoses"][0]["detail"]["category"], "operator");
}

#[test]
fn syntax_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("grades/submission.wb")).unwrap().replace("=(B4+C4)/2", "=(B4+C4/2");
    let sub = dir.path().join("broken.wb");
    fs::write(&sub, text).unwrap();
    let o = check(&sub, &["--format", "json", "--level", "6"]);
    assert_eq!(o.status.code(), Some(2));
    let json = stdout(&o);
    assert_schema(&json);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["status"], "syntax_error");
    assert_eq!(v["diagnoses"], serde_json::json!([]));
    assert_eq!(v["syntax"][0]["cell"], "D4");
    assert_eq!(run(&["validate", path(&sub)]).status.code(), Some(2));
    assert_eq!(run(&["validate", path(&data("grades/submission.wb"))]).status.code(), Some(0));
}

#[test]
fn batch_grades_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["submission.wb", "solution.wb"] {
        fs::copy(data(&format!("grades/{f}")), dir.path().join(f)).unwrap();
    }
    fs::write(dir.path().join("corrupt.wb"), "{ not a workbook").unwrap();
    let out = dir.path().join("reports.jsonl");
    let task = task();
    let args = ["batch", path(&task), path(dir.path()), "--out", path(&out), "--level", "3"];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "file,status,value_errors,formula_errors\ncorrupt,error,,\nsolution,pass,0,0\nsubmission,fail,3,2\n"
    );
    let lines = fs::read_to_string(&out).unwrap();
    let lines: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0]["error"].is_string());
    assert_eq!(lines[2]["file"], "submission.wb");
    assert_eq!(lines[2]["report"]["status"], "fail");
    assert_schema(&lines[1]["report"].to_string());
    let again = run(&args);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn batch_empty_directory_and_bad_task() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("subs");
    fs::create_dir(&sub).unwrap();
    let out = dir.path().join("r.jsonl");
    let task = task();
    let o = run(&["batch", path(&task), path(&sub), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "file,status,value_errors,formula_errors\n");
    let bogus = dir.path().join("none.json");
    let o = run(&["batch", path(&bogus), path(&sub), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn metrics_and_graph() {
    let o = run(&["metrics", path(&data("grades/solution.wb"))]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["formula_cell_count"], 6);
    assert_eq!(m["longest_chain"], 2);
    let o = run(&["graph", path(&data("grades/solution.wb"))]);
    assert_eq!(o.status.code(), Some(0));
    let dot = stdout(&o);
    assert!(dot.starts_with("digraph dependencies {\n"));
    assert_eq!(dot.matches("->").count(), 15);
    assert_eq!(run(&["graph", path(&data("grades/solution.wb"))]).stdout, o.stdout);
}
