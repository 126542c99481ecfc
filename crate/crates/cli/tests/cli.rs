use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairevo"))
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in {out}"))
        .to_string()
}

fn write_config(dir: &Path, dataset: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "dataset": dataset,
        "schema": data_dir().join("adult.schema.json"),
        "max_rows": 400,
        "seeds": 1,
        "folds": 2,
        "population_size": 6,
        "max_generations": 3,
        "parallel_jobs": 1,
        "out": "out",
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run_small(dir: &Path, extra: &[&str]) -> Output {
    let cfg = write_config(dir, &data_dir().join("adult.csv"));
    bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--time-budget", "2"])
        .args(extra)
        .output()
        .unwrap()
}

const REPORTS: [&str; 7] = [
    "table4.csv",
    "scatter.csv",
    "dr_modes.csv",
    "features.csv",
    "models.csv",
    "evolution.csv",
    "sensitive_props.csv",
];

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for name in REPORTS.iter().chain(&["config.json", "plan.json", "experiment.json"]) {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let runs = fs::read_dir(out.join("runs")).unwrap().count();
    assert_eq!(runs, 4);
    assert!(stdout(&o).contains("4/4 runs completed"));
}

#[test]
fn alpha_override_is_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(dir.path(), &["--alpha", "0.6", "--setup", "fair"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["alpha"], 0.6);
    let plan: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/plan.json")).unwrap()).unwrap();
    assert_eq!(plan["alpha"], 0.6);
    assert_eq!(plan["setups"], serde_json::json!(["fairness_aware"]));
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &dir.path().join("nope.csv"));
    let o = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn invalid_alpha_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(dir.path(), &["--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

fn score(dir: &Path, preds: &str, labels: &str, groups: &str) -> Output {
    fs::write(dir.join("p.txt"), preds).unwrap();
    fs::write(dir.join("y.txt"), labels).unwrap();
    fs::write(dir.join("g.csv"), groups).unwrap();
    bin()
        .arg("score")
        .arg("--predictions")
        .arg(dir.join("p.txt"))
        .arg("--labels")
        .arg(dir.join("y.txt"))
        .arg("--groups")
        .arg(dir.join("g.csv"))
        .output()
        .unwrap()
}

#[test]
fn perfect_predictions_are_fair_and_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let o = score(
        dir.path(),
        "1\n0\n1\n0\n1\n0\n1\n0\n",
        "1\n0\n1\n0\n1\n0\n1\n0\n",
        "sex\nm\nm\nm\nm\nf\nf\nf\nf\n",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(value(&out, "fairness_component"), "0");
    assert_eq!(value(&out, "mcc"), "1");
    assert_eq!(value(&out, "performance_component"), "0");
    assert_eq!(value(&out, "groups"), "2");
}

#[test]
fn three_groups_match_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let preds = "0.9\n0.9\n0.1\n0.1\n0.9\n0.9\n0.9\n0.1\n0.1\n0.1\n0.1\n0.9\n";
    let labels = "1\n0\n1\n0\n1\n1\n0\n0\n1\n0\n0\n1\n";
    let groups = "race\na\na\na\na\nb\nb\nb\nb\nc\nc\nc\nc\n";
    let o = score(dir.path(), preds, labels, groups);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    // selection rates 0.5, 0.75, 0.25; TPRs 0.5, 1, 0.5; FPRs 0.5, 0.5, 0
    assert_eq!(value(&out, "dp"), "0.5");
    assert_eq!(value(&out, "eo"), "0.5");
    // tp 4, fp 2, fn 2, tn 4
    assert_eq!(value(&out, "mcc"), "0.333333");
    assert_eq!(value(&out, "tpr"), "0.666667");
    assert_eq!(value(&out, "rows"), "12");
}

#[test]
fn empty_and_misaligned_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = score(dir.path(), "", "", "sex\n");
    assert_eq!(o.status.code(), Some(2));
    let o = score(dir.path(), "0.2\n0.8\n", "0\n1\n1\n", "sex\nm\nf\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("misaligned"));
    let o = score(dir.path(), "0.2\n1.8\n", "0\n1\n", "sex\nm\nf\n");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_regenerates_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_small(dir.path(), &[]).status.success());
    let out = dir.path().join("out");
    let before: Vec<Vec<u8>> = REPORTS.iter().map(|n| fs::read(out.join(n)).unwrap()).collect();
    for n in REPORTS {
        fs::remove_file(out.join(n)).unwrap();
    }
    let o = bin().arg("report").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stderr(&o).contains("incomplete"));
    for (n, b) in REPORTS.iter().zip(before) {
        assert_eq!(fs::read(out.join(n)).unwrap(), b, "{n} differs");
    }
}

#[test]
fn report_flags_missing_corrupt_and_partial_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("report").arg(dir.path().join("absent")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    assert!(run_small(dir.path(), &[]).status.success());
    let out = dir.path().join("out");
    let mut runs: Vec<PathBuf> = fs::read_dir(out.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    runs.sort();

    fs::remove_file(runs[0].join("report.json")).unwrap();
    let o = bin().arg("report").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("incomplete: 3 of 4 runs completed"));
    let table = fs::read_to_string(out.join("table4.csv")).unwrap();
    assert!(table.lines().skip(1).all(|l| l.ends_with(",false")));

    fs::write(runs[1].join("report.json"), "garbage").unwrap();
    let o = bin().arg("report").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&runs[1].join("report.json").display().to_string()));
}
