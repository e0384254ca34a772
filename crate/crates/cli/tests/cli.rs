use std::path::Path;
use std::process::{Command, Output};

fn seizure(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seizure"))
        .current_dir(dir)
        .env_remove("SEIZURE_STORE")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small synthetic corpus: six patients, two minutes each.
fn corpus(dir: &Path) {
    let o = seizure(dir, &["synth", "data", "--patients", "6", "--duration", "120"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn dry_run_prints_plan_without_touching_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seizure(tmp.path(), &["--dry-run", "--output", "out", "preprocess"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("preprocess:"), "{text}");
    assert!(text.contains("256 Hz"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), r#"{"selection": {"boruta_rounds": 3}}"#).unwrap();
    let o = seizure(tmp.path(), &["--config", "c.json", "--dry-run", "select"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("boruta_rounds"), "{err}");
    assert!(err.contains("max_rows"), "accepted keys listed: {err}");
}

#[test]
fn invalid_value_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), r#"{"cv": {"folds": 1}}"#).unwrap();
    let o = seizure(tmp.path(), &["--config", "c.json", "--dry-run", "select"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cv.folds"), "{}", stderr(&o));
}

#[test]
fn bad_usage_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(seizure(tmp.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(seizure(tmp.path(), &["--jobs", "0", "report"]).status.code(), Some(1));
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seizure(tmp.path(), &["ingest", "absent.edf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.edf"));
}

#[test]
fn corrupt_edf_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("x.edf"), b"not an edf file").unwrap();
    let o = seizure(tmp.path(), &["--output", "out", "ingest", "x.edf"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn evaluate_before_train_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    let cfg = ["--config", "data/pipeline.json"];
    let o = seizure(tmp.path(), &[&cfg[..], &["ingest", "data"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    for stage in ["preprocess", "featurize", "select", "tune"] {
        let o = seizure(tmp.path(), &[&cfg[..], &[stage]].concat());
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let o = seizure(tmp.path(), &[&cfg[..], &["evaluate"]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing stage: train"), "{}", stderr(&o));
}

#[test]
fn store_path_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    let o = Command::new(env!("CARGO_BIN_EXE_seizure"))
        .current_dir(tmp.path())
        .env("SEIZURE_STORE", "elsewhere/db.sqlite")
        .args(["--config", "data/pipeline.json", "ingest", "data"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("elsewhere/db.sqlite").is_file());
    assert!(!tmp.path().join("data/out/seizure.sqlite").exists());
}

#[test]
fn runs_are_reproducible_from_seed_and_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    let run = |extra: &[&str]| {
        let o = seizure(tmp.path(), &[extra, &["--jobs", "2", "run", "data"]].concat());
        assert!(o.status.success(), "{}", stderr(&o));
        String::from_utf8(o.stdout).unwrap()
    };
    let report = run(&["--config", "data/pipeline.json", "--output", "a"]);
    assert!(report.contains("mean_vote"), "{report}");
    run(&["--config", "data/pipeline.json", "--output", "b"]);
    let a = std::fs::read(tmp.path().join("a/metrics.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/metrics.csv")).unwrap();
    assert_eq!(a, b);

    // The written config carries every resolved default and reproduces the run.
    let effective = tmp.path().join("a/effective_config.json");
    let text = std::fs::read_to_string(&effective).unwrap();
    assert!(text.contains("\"n_iterations\": 20"), "{text}");
    run(&["--config", "a/effective_config.json", "--output", "c"]);
    assert_eq!(a, std::fs::read(tmp.path().join("c/metrics.csv")).unwrap());
    for f in ["stats.csv", "roc.csv", "box.csv", "importance.csv", "report.txt", "postprocess_diff.csv"] {
        assert!(tmp.path().join("a").join(f).is_file(), "{f}");
    }
}

#[test]
fn single_stage_rerun_replaces_its_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    let cfg = ["--config", "data/pipeline.json"];
    let o = seizure(tmp.path(), &[&cfg[..], &["run", "data"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let before = std::fs::read(tmp.path().join("data/out/metrics.csv")).unwrap();
    // Re-running voting discards the refined streams and the evaluation.
    let o = seizure(tmp.path(), &[&cfg[..], &["vote"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = seizure(tmp.path(), &[&cfg[..], &["report"]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing stage: evaluate"), "{}", stderr(&o));
    let o = seizure(tmp.path(), &[&cfg[..], &["evaluate"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let raw_only = std::fs::read_to_string(tmp.path().join("data/out/metrics.csv")).unwrap();
    assert!(!raw_only.contains("postprocessed"));
    for stage in ["postprocess", "evaluate"] {
        let o = seizure(tmp.path(), &[&cfg[..], &[stage]].concat());
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    assert_eq!(before, std::fs::read(tmp.path().join("data/out/metrics.csv")).unwrap());
}
