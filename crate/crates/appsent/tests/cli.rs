//! End-to-end tests driving the compiled binary: exit codes, output file
//! shapes, manifest contents, and byte-identical reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn appsent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_appsent"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn run_ingest(out: &Path) -> Output {
    appsent(&[
        "ingest",
        "--train",
        fixture("sample_reviews.csv").to_str().unwrap(),
        "--test",
        fixture("sample_survey.csv").to_str().unwrap(),
        "--apps",
        fixture("sample_apps.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn ingest_writes_cleaned_files_and_load_report() {
    let out = tempfile::tempdir().unwrap();
    let output = run_ingest(out.path());
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));

    let dir = out.path().join("ingest");
    for name in [
        "cleaned_train_reviews.csv",
        "cleaned_test_reviews.csv",
        "cleaned_apps.csv",
        "load_report.json",
        "manifest.json",
    ] {
        assert!(dir.join(name).exists(), "missing {name}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("load_report.json")).unwrap()).unwrap();
    assert_eq!(report["train_reviews"]["input_rows"], 53);
    assert_eq!(report["train_reviews"]["loaded"], 52);
    assert_eq!(report["train_reviews"]["neutral"], 1);
    assert_eq!(report["test_reviews"]["loaded"], 20);
    assert_eq!(report["apps"]["loaded"], 30);
    assert_eq!(report["apps"]["rejects"].as_array().unwrap().len(), 0);

    let stdout = stdout_of(&output);
    assert!(stdout.contains("52 loaded"), "stdout: {stdout}");

    // cleaned train file: header + 52 binary-labeled rows, neutral excluded
    let cleaned = fs::read_to_string(dir.join("cleaned_train_reviews.csv")).unwrap();
    assert_eq!(cleaned.lines().count(), 53);
    assert!(cleaned.starts_with("app,text,rating,label\n"));
}

#[test]
fn ingest_rerun_is_byte_identical() {
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    assert_eq!(exit_code(&run_ingest(out_a.path())), 0);
    assert_eq!(exit_code(&run_ingest(out_b.path())), 0);
    for name in [
        "cleaned_train_reviews.csv",
        "cleaned_test_reviews.csv",
        "cleaned_apps.csv",
        "load_report.json",
    ] {
        let a = fs::read(out_a.path().join("ingest").join(name)).unwrap();
        let b = fs::read(out_b.path().join("ingest").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn missing_input_path_exits_2_naming_the_path() {
    let out = tempfile::tempdir().unwrap();
    let output = appsent(&[
        "ingest",
        "--train",
        "/definitely/not/here.csv",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    assert!(
        stderr_of(&output).contains("/definitely/not/here.csv"),
        "stderr must name the missing path: {}",
        stderr_of(&output)
    );
}

#[test]
fn unknown_flag_exits_2() {
    let output = appsent(&["bench", "--nonsense"]);
    assert_eq!(exit_code(&output), 2);
}

fn run_bench(out: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<String> = vec![
        "bench".into(),
        "--train".into(),
        fixture("sample_reviews.csv").to_str().unwrap().into(),
        "--test".into(),
        fixture("sample_survey.csv").to_str().unwrap().into(),
        "--out".into(),
        out.to_str().unwrap().into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    Command::new(env!("CARGO_BIN_EXE_appsent"))
        .args(&args)
        .output()
        .expect("binary runs")
}

#[test]
fn bench_two_cell_grid_writes_tables_and_manifest() {
    let out = tempfile::tempdir().unwrap();
    let output = run_bench(out.path(), &["--models", "SVM,NB", "--featurizations", "unigram"]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));

    let dir = out.path().join("bench");
    let accuracy = fs::read_to_string(dir.join("accuracy.csv")).unwrap();
    let lines: Vec<&str> = accuracy.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "model,unigram");
    assert!(lines[1].starts_with("SVM,"));
    assert!(lines[2].starts_with("NB,"));

    let confusion = fs::read_to_string(dir.join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 3);
    assert!(confusion.starts_with("model,featurization,tp,fp,fn,tn\n"));

    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap();
    assert_eq!(reports["reports"].as_array().unwrap().len(), 2);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "bench");
    assert_eq!(manifest["config"]["seed"], 42);
    assert_eq!(manifest["failures"].as_array().unwrap().len(), 0);
    // train, test inputs hashed
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 2);
    for digest in manifest["inputs"].as_object().unwrap().values() {
        assert_eq!(digest.as_str().unwrap().len(), 64);
    }
}

#[test]
fn bench_full_grid_has_seven_rows_and_three_columns() {
    let out = tempfile::tempdir().unwrap();
    let output = run_bench(out.path(), &["--jobs", "2"]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));

    let accuracy = fs::read_to_string(out.path().join("bench/accuracy.csv")).unwrap();
    let lines: Vec<&str> = accuracy.lines().collect();
    assert_eq!(lines[0], "model,unigram,unigram+bigram,unigram+bigram+trigram");
    assert_eq!(lines.len(), 8);
    let models: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        models,
        ["NB", "LR", "SVM", "KNN", "RF", "LR(Bagging)", "NB(Bagging)"]
    );
}

#[test]
fn bench_records_cell_failures_and_exits_1() {
    // Every token is a stopword, so vocabulary fitting fails and every
    // requested cell fails with it; the manifest explains, exit code 1.
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("stoponly.csv");
    fs::write(&train, "app,review,rating\nX,the and of,4\nY,a an the,2\n").unwrap();
    let out = tempfile::tempdir().unwrap();
    let output = appsent(&[
        "bench",
        "--train",
        train.to_str().unwrap(),
        "--test",
        fixture("sample_survey.csv").to_str().unwrap(),
        "--models",
        "NB,SVM",
        "--featurizations",
        "unigram",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 1);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("bench/manifest.json")).unwrap())
            .unwrap();
    let failures = manifest["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 2);
    assert_eq!(failures[0]["model"], "NB");
    assert!(failures[0]["error"].as_str().unwrap().contains("vocabulary"));
}

#[test]
fn bench_reports_are_byte_identical_across_jobs_and_reruns() {
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    let out_c = tempfile::tempdir().unwrap();
    assert_eq!(exit_code(&run_bench(out_a.path(), &["--jobs", "2", "--seed", "7"])), 0);
    assert_eq!(exit_code(&run_bench(out_b.path(), &["--jobs", "2", "--seed", "7"])), 0);
    assert_eq!(exit_code(&run_bench(out_c.path(), &["--jobs", "1", "--seed", "7"])), 0);

    for name in ["accuracy.csv", "f_measure.csv", "confusion.csv", "reports.json"] {
        let a = fs::read(out_a.path().join("bench").join(name)).unwrap();
        let b = fs::read(out_b.path().join("bench").join(name)).unwrap();
        let c = fs::read(out_c.path().join("bench").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        assert_eq!(a, c, "{name} differs across --jobs values");
    }
}

#[test]
fn config_file_is_obeyed_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    fs::write(
        &config_path,
        format!(
            "seed = 7\n\n[paths]\ntrain_reviews = {:?}\ntest_reviews = {:?}\n\n[bench]\nmodels = [\"NB\"]\nfeaturizations = [\"unigram\"]\n",
            fixture("sample_reviews.csv"),
            fixture("sample_survey.csv"),
        ),
    )
    .unwrap();

    let out = tempfile::tempdir().unwrap();
    let output = appsent(&[
        "bench",
        "--config",
        config_path.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("bench/manifest.json")).unwrap())
            .unwrap();
    // flag wins over the file seed, file shapes the grid
    assert_eq!(manifest["config"]["seed"], 9);
    assert_eq!(manifest["config"]["bench"]["models"], serde_json::json!(["NB"]));

    let accuracy = fs::read_to_string(out.path().join("bench/accuracy.csv")).unwrap();
    assert_eq!(accuracy.lines().count(), 2);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    fs::write(&config_path, "sede = 7\n").unwrap();
    let output = appsent(&["ingest", "--config", config_path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr_of(&output).contains("bad.toml"));
}

#[test]
fn analyze_without_model_omits_classifier_section_with_notice() {
    let out = tempfile::tempdir().unwrap();
    let output = appsent(&[
        "analyze",
        "--train",
        fixture("sample_reviews.csv").to_str().unwrap(),
        "--test",
        fixture("sample_survey.csv").to_str().unwrap(),
        "--apps",
        fixture("sample_apps.csv").to_str().unwrap(),
        "--lexicon",
        fixture("lexicon.txt").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));

    let dir = out.path().join("analyze");
    for name in [
        "rq1_distributions.csv",
        "rq2_size_vs_rating.csv",
        "rq3_correlations.csv",
        "rq4_sentiment.csv",
        "rq5_price_vs_installs.csv",
        "summary.json",
    ] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    assert!(!dir.join("rq6_confusion.csv").exists());
    assert!(stderr_of(&output).contains("classifier section omitted"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["notices"].as_array().unwrap().len(), 1);
    // --seed was omitted, so the default is recorded explicitly
    assert_eq!(manifest["config"]["seed"], 42);
}

#[test]
fn analyze_with_missing_corpus_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let output = appsent(&[
        "analyze",
        "--apps",
        "/no/apps.csv",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr_of(&output).contains("/no/apps.csv"));
}

#[test]
fn export_model_then_analyze_produces_classifier_section() {
    let out = tempfile::tempdir().unwrap();
    let export = appsent(&[
        "export-model",
        "--train",
        fixture("sample_reviews.csv").to_str().unwrap(),
        "--model",
        "SVM",
        "--featurization",
        "unigram",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&export), 0, "stderr: {}", stderr_of(&export));
    let bundle = out.path().join("model");
    for name in ["meta.json", "vocabulary.json", "model.json", "manifest.json"] {
        assert!(bundle.join(name).exists(), "missing {name}");
    }

    let analyze = appsent(&[
        "analyze",
        "--train",
        fixture("sample_reviews.csv").to_str().unwrap(),
        "--test",
        fixture("sample_survey.csv").to_str().unwrap(),
        "--apps",
        fixture("sample_apps.csv").to_str().unwrap(),
        "--lexicon",
        fixture("lexicon.txt").to_str().unwrap(),
        "--model-dir",
        bundle.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&analyze), 0, "stderr: {}", stderr_of(&analyze));

    let confusion = fs::read_to_string(out.path().join("analyze/rq6_confusion.csv")).unwrap();
    let lines: Vec<&str> = confusion.lines().collect();
    assert_eq!(lines[0], "tp,fp,fn,tn,accuracy");
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    let total: u64 = cells[..4].iter().map(|c| c.parse::<u64>().unwrap()).sum();
    assert_eq!(total, 20, "survey has 20 held-out rows");
}

#[test]
fn exported_bagged_model_round_trips_through_analyze() {
    let out = tempfile::tempdir().unwrap();
    let export = appsent(&[
        "export-model",
        "--train",
        fixture("sample_reviews.csv").to_str().unwrap(),
        "--model",
        "NB(Bagging)",
        "--featurization",
        "unigram",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&export), 0, "stderr: {}", stderr_of(&export));
    let bundle = out.path().join("model");
    assert!(bundle.join("ensemble/manifest.json").exists());
    assert!(!bundle.join("model.json").exists());

    let analyze = appsent(&[
        "analyze",
        "--train",
        fixture("sample_reviews.csv").to_str().unwrap(),
        "--test",
        fixture("sample_survey.csv").to_str().unwrap(),
        "--apps",
        fixture("sample_apps.csv").to_str().unwrap(),
        "--lexicon",
        fixture("lexicon.txt").to_str().unwrap(),
        "--model-dir",
        bundle.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&analyze), 0, "stderr: {}", stderr_of(&analyze));
    assert!(out.path().join("analyze/rq6_confusion.csv").exists());
}

#[test]
fn score_lexicon_scores_labeled_and_neutral_reviews() {
    let out = tempfile::tempdir().unwrap();
    let output = appsent(&[
        "score-lexicon",
        "--reviews",
        fixture("sample_reviews.csv").to_str().unwrap(),
        "--lexicon",
        fixture("lexicon.txt").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));

    let scored = fs::read_to_string(out.path().join("score-lexicon/scored.csv")).unwrap();
    let mut lines = scored.lines();
    assert_eq!(
        lines.next().unwrap(),
        "app,label,polarity,subjectivity,orientation,text"
    );
    // 52 labeled rows plus the one neutral row
    assert_eq!(scored.lines().count(), 54);
    let neutral_rows: Vec<&str> = scored
        .lines()
        .filter(|line| line.starts_with("Pinterest,,"))
        .collect();
    assert_eq!(neutral_rows.len(), 1, "neutral row ships with empty label");
}
