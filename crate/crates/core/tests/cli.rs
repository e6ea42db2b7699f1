use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn motorclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motorclass")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_into(dir: &Path, per_side: usize, seed: u64) {
    let o = motorclass(&["synth", "--trials-per-side", &per_side.to_string(), "--seed", &seed.to_string(), "--out", p(dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn csv_files(dir: &Path) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count()
}

#[test]
fn synth_writes_a_valid_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_into(&data, 40, 1);
    assert_eq!(csv_files(&data), 80);
    assert!(data.join("manifest.json").is_file());
    assert!(data.join("config.json").is_file());

    let o = motorclass(&["validate", p(&data), "--out", p(&tmp.path().join("v"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("80"), "{}", stdout(&o));
}

#[test]
fn one_trial_per_side_writes_two_files() {
    let tmp = tempfile::tempdir().unwrap();
    synth_into(tmp.path(), 1, 3);
    assert_eq!(csv_files(tmp.path()), 2);
}

#[test]
fn invalid_band_is_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let o = motorclass(&["synth", "--band", "gamma", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--band"), "{}", stderr(&o));

    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"synth": {"target_band": "gamma"}}"#).unwrap();
    let o = motorclass(&["--config", p(&cfg), "synth", "--out", p(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("synth.target_band"), "{}", stderr(&o));
    assert!(!tmp.path().join("x").join("manifest.json").exists());
}

#[test]
fn unwritable_output_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = motorclass(&["synth", "--trials-per-side", "1", "--out", p(&blocker.join("sub"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = motorclass(&["validate", p(&tmp.path().join("nowhere")), "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn ttest_writes_every_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_into(&data, 10, 2);
    let out = tmp.path().join("stats");
    let o = motorclass(&["ttest", p(&data), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sig = fs::read_to_string(out.join("significance.csv")).unwrap();
    assert_eq!(sig.lines().count(), 301);
    assert_eq!(fs::read_to_string(out.join("bands.csv")).unwrap().lines().count(), 49);

    // The band summary can be rebuilt from the significance file alone.
    let again = tmp.path().join("again");
    let o = motorclass(&["bands", p(&out.join("significance.csv")), "--out", p(&again)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(again.join("bands.csv")).unwrap(),
        fs::read_to_string(out.join("bands.csv")).unwrap()
    );
}

#[test]
fn evaluate_prints_six_rows_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_into(&data, 9, 4);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = motorclass(&["evaluate", p(&data), "--seed", "5", "--threads", "2", "--out", p(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let table = stdout(&o);
        assert_eq!(table.lines().count(), 7, "{table}");
        assert!(table.contains("A Rule Classifier"));
        fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
    let csv = fs::read_to_string(tmp.path().join("a").join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn classifier_subset_skips_fusion() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_into(&data, 9, 6);
    let out = tmp.path().join("eval");
    let o = motorclass(&["evaluate", p(&data), "--classifiers", "svm,lda", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert!(stderr(&o).contains("fusion"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["classifiers"].as_array().unwrap().len(), 2);
    assert!(report["fusion_error"].is_string());
}

#[test]
fn synth_ttest_evaluate_train_report_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_into(&data, 9, 7);
    for (cmd, out) in [("features", "f"), ("ttest", "t"), ("evaluate", "e"), ("train", "m")] {
        let o = motorclass(&[cmd, p(&data.join("manifest.json")), "--out", p(&tmp.path().join(out))]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        assert!(tmp.path().join(out).join("config.json").is_file());
    }
    assert_eq!(fs::read_to_string(tmp.path().join("f/features.csv")).unwrap().lines().count(), 145);
    let model: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("m/model.json")).unwrap()).unwrap();
    assert_eq!(model["system"]["models"].as_array().unwrap().len(), 5);

    let report = tmp.path().join("e/report.json");
    let o = motorclass(&["report", p(&report), p(&report), "--out", p(&tmp.path().join("r"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("r/batch.json").is_file());
}

#[test]
fn help_exits_zero() {
    let o = motorclass(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("evaluate"));
}
