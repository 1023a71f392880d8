use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ssc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssc"))
        .args(args)
        .current_dir(cwd)
        .env_clear()
        .output()
        .unwrap()
}

fn layout() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("testdata/three-page.json")
        .display()
        .to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn only_subdir(dir: &Path) -> PathBuf {
    let mut subdirs: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(subdirs.len(), 1, "{subdirs:?}");
    subdirs.pop().unwrap()
}

#[test]
fn generate_writes_per_page_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ssc(&["generate", "--layout", &layout(), "--style", "muted", "--seed", "1", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = only_subdir(&tmp.path().join("o"));
    let hash = dir.file_name().unwrap().to_str().unwrap().to_string();
    let names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".composite.ppm")).count(), 3);
    assert_eq!(names.iter().filter(|n| n.ends_with(".background.ppm")).count(), 3);
    assert_eq!(names.iter().filter(|n| n.ends_with(".latent.json")).count(), 3);
    assert_eq!(names.iter().filter(|n| n.ends_with(".trajectory.json")).count(), 3);

    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["config_hash"], hash.as_str());
    assert_eq!(metrics["pages"].as_object().unwrap().len(), 3);
    assert!(metrics["note"].as_str().unwrap().contains("proxy"));

    for name in &names {
        let bytes = std::fs::read(dir.join(name)).unwrap();
        assert!(
            bytes.windows(hash.len()).any(|w| w == hash.as_bytes()),
            "{name} does not carry the config hash"
        );
    }
}

#[test]
fn existing_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["generate", "--layout", &layout(), "--steps", "5", "--out", "o"];
    assert!(ssc(&args, tmp.path()).status.success());
    let again = ssc(&args, tmp.path());
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(ssc(&forced, tmp.path()).status.success());

    // a changed config lands in a different directory
    let changed = ssc(&["generate", "--layout", &layout(), "--steps", "6", "--out", "o"], tmp.path());
    assert!(changed.status.success());
    assert_eq!(std::fs::read_dir(tmp.path().join("o")).unwrap().count(), 2);
}

#[test]
fn config_errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let zero = ssc(&["generate", "--layout", &layout(), "--steps", "0"], tmp.path());
    assert_eq!(zero.status.code(), Some(2));
    assert!(stderr(&zero).contains("steps"));

    let unknown = ssc(&["generate", "--layout", &layout(), "--style", "neon"], tmp.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("not found"));

    let missing = ssc(&["generate", "--layout", "nope.json"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("nope.json"));

    let lambda = ssc(&["verify", "all", "--lambda", "1.5"], tmp.path());
    assert_eq!(lambda.status.code(), Some(2));
    assert!(stderr(&lambda).contains("lambda"));
}

#[test]
fn env_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ssc"))
        .args(["generate", "--layout", &layout()])
        .current_dir(tmp.path())
        .env_clear()
        .env("SSC_STEPS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("steps"));
}

#[test]
fn config_file_is_merged_under_flags() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.json"), r#"{"steps": 0, "lambda_s": 0.5}"#).unwrap();
    let bad = ssc(&["generate", "--layout", &layout(), "--config", "run.json"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
    let ok = ssc(&["generate", "--layout", &layout(), "--config", "run.json", "--steps", "3"], tmp.path());
    assert!(ok.status.success(), "{}", stderr(&ok));
    let cfg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(only_subdir(&tmp.path().join("ssc-out")).join("config.json")).unwrap())
            .unwrap();
    assert_eq!(cfg["steps"], 3);
    assert_eq!(cfg["lambda_s"], 0.5);
}

#[test]
fn verify_prop2_passes_and_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ssc(&["verify", "prop2", "--report", "r.json"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS prop2/product-law"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["suite"], "prop2");
}

#[test]
fn verify_reports_failures_with_exit_one() {
    // two steps cannot satisfy the late-decay requirement
    let tmp = tempfile::tempdir().unwrap();
    let out = ssc(&["verify", "prop1", "--steps", "2", "--report", "r.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1), "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("FAIL prop1/late-decay"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("r.json")).unwrap()).unwrap();
    let failing = report["propositions"][0]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["passed"] == false)
        .unwrap()
        .clone();
    assert!(failing["worst_step"].is_u64());
    assert!(failing["max_deviation"].is_f64());
}

#[test]
fn stylebank_build_and_list() {
    let tmp = tempfile::tempdir().unwrap();
    let built = ssc(&["stylebank", "build", "--dim", "16", "--path", "bank.json"], tmp.path());
    assert!(built.status.success(), "{}", stderr(&built));
    let listed = ssc(&["stylebank", "list", "--path", "bank.json"], tmp.path());
    assert!(listed.status.success());
    let lines: Vec<String> = stdout(&listed).lines().map(String::from).collect();
    assert_eq!(lines.len(), 7);
    for line in &lines {
        let norm: f64 = line.rsplit("|s|=").next().unwrap().parse().unwrap();
        assert!((norm - 1.0).abs() <= 1e-9, "{line}");
    }

    let dup = ssc(&["stylebank", "build", "--labels", "muted,muted", "--path", "dup.json"], tmp.path());
    assert_eq!(dup.status.code(), Some(2));
    assert!(stderr(&dup).contains("duplicate"));

    let gen = ssc(
        &["generate", "--layout", &layout(), "--bank", "bank.json", "--style", "colorful", "--steps", "4"],
        tmp.path(),
    );
    assert!(gen.status.success(), "{}", stderr(&gen));
}
