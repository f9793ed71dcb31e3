use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use odbench_core::data::read_dataset_csv;
use odbench_core::rankstats::square_matrix_from_csv;
use odbench_core::AucMatrix;
use tempfile::TempDir;

fn odbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odbench"))
        .args(args)
        .env_remove("ODBENCH_THREADS")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Generates two small archetype CSVs and a manifest over them.
fn fixture_manifest(dir: &Path, invert_second: bool) -> PathBuf {
    for (archetype, seed) in [("global", "3"), ("local", "4")] {
        let out = odbench(&[
            "synth",
            "--archetype",
            archetype,
            "--n",
            "120",
            "--d",
            "2",
            "--seed",
            seed,
            "--out",
            path(dir),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let manifest = dir.join("manifest.json");
    let body = serde_json::json!([
        {"name": "g", "path": "global-n120-d2-s3.csv"},
        {"name": "l", "path": "local-n120-d2-s4.csv", "invert_labels": invert_second},
    ]);
    fs::write(&manifest, body.to_string()).unwrap();
    manifest
}

fn run(manifest: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--manifest",
        path(manifest),
        "--out",
        path(out),
        "--algorithms",
        "kNN,COPOD",
        "--repeats",
        "1",
    ];
    args.extend_from_slice(extra);
    odbench(&args)
}

#[test]
fn synth_writes_csv_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let out = odbench(&[
        "synth",
        "--archetype",
        "clustered",
        "--n",
        "100",
        "--seed",
        "9",
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let raw = read_dataset_csv(&dir.path().join("clustered-n100-d2-s9.csv"), "c").unwrap();
    assert_eq!(raw.rows.len(), 100);
    assert_eq!(raw.labels.unwrap().iter().filter(|&&l| l == 1.0).count(), 5);
    let meta: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("clustered-n100-d2-s9.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["anomalies"], 5);
}

#[test]
fn run_writes_matrix_and_grid_detail() {
    let dir = TempDir::new().unwrap();
    let manifest = fixture_manifest(dir.path(), false);
    let out_dir = dir.path().join("results");
    let out = run(&manifest, &out_dir, &[]);
    assert!(out.status.success(), "{}", stderr(&out));

    let auc = AucMatrix::read_csv(&out_dir.join("auc_matrix.csv")).unwrap();
    assert_eq!(auc.algorithms, vec!["kNN", "COPOD"]);
    assert_eq!(auc.datasets, vec!["g", "l"]);
    let grid: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("grid_detail.json")).unwrap())
            .unwrap();
    assert_eq!(grid.as_array().unwrap().len(), 4);
    for name in ["g", "l"] {
        assert!(out_dir
            .join("preprocess")
            .join(format!("{name}.json"))
            .exists());
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("run_metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["repeats"], 1);
    assert!(meta["settings"]["inne_subsample"].is_string());

    // the written matrix re-ingests losslessly
    let text = fs::read_to_string(out_dir.join("auc_matrix.csv")).unwrap();
    assert_eq!(auc.to_csv_string(6), text);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let manifest = fixture_manifest(dir.path(), false);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(
        &manifest,
        &a,
        &["--algorithms", "kNN,IF,LODA", "--threads", "1"]
    )
    .status
    .success());
    assert!(run(
        &manifest,
        &b,
        &["--algorithms", "kNN,IF,LODA", "--threads", "3"]
    )
    .status
    .success());
    for file in ["auc_matrix.csv", "grid_detail.json", "run_metadata.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn inverted_labels_flip_the_auc() {
    let dir = TempDir::new().unwrap();
    let plain = fixture_manifest(dir.path(), false);
    let flipped_dir = dir.path().join("flipped");
    fs::create_dir(&flipped_dir).unwrap();
    let flipped = fixture_manifest(&flipped_dir, true);
    assert!(run(&plain, &dir.path().join("p"), &[]).status.success());
    assert!(run(&flipped, &dir.path().join("f"), &[]).status.success());
    let p = AucMatrix::read_csv(&dir.path().join("p/auc_matrix.csv")).unwrap();
    let f = AucMatrix::read_csv(&dir.path().join("f/auc_matrix.csv")).unwrap();
    for a in 0..2 {
        assert_eq!(p.values[[a, 0]], f.values[[a, 0]]);
        assert!((p.values[[a, 1]] + f.values[[a, 1]] - 1.0).abs() < 2e-6);
    }
    let meta = fs::read_to_string(dir.path().join("f/run_metadata.json")).unwrap();
    assert!(meta.contains("\"inverted_by_manifest\": [\n    \"l\"\n  ]"));
}

#[test]
fn missing_dataset_names_the_entry() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join("manifest.json");
    fs::write(&manifest, r#"[{"name": "ghost", "path": "nowhere.csv"}]"#).unwrap();
    let out = run(&manifest, &dir.path().join("r"), &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("ghost"), "{}", stderr(&out));
}

#[test]
fn keep_going_records_gaps_and_fails_the_exit_code() {
    let dir = TempDir::new().unwrap();
    let manifest = fixture_manifest(dir.path(), false);
    let mut entries: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    entries
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"name": "ghost", "path": "nowhere.csv"}));
    fs::write(&manifest, entries.to_string()).unwrap();
    let out_dir = dir.path().join("r");
    let out = run(&manifest, &out_dir, &["--keep-going"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let gaps: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("gaps.json")).unwrap()).unwrap();
    assert_eq!(gaps[0]["dataset"], "ghost");
    assert_eq!(
        AucMatrix::read_csv(&out_dir.join("auc_matrix.csv"))
            .unwrap()
            .datasets,
        vec!["g", "l"]
    );
}

#[test]
fn validate_reports_each_entry() {
    let dir = TempDir::new().unwrap();
    let manifest = fixture_manifest(dir.path(), false);
    let out = odbench(&["validate", "--manifest", path(&manifest)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ok g: 120 samples, 2 features, 6 anomalies"));
    assert!(text.contains("ok l:"));
}

#[test]
fn single_dataset_report_puts_best_at_100() {
    let dir = TempDir::new().unwrap();
    let manifest = fixture_manifest(dir.path(), false);
    let mut entries: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    entries.as_array_mut().unwrap().truncate(1);
    fs::write(&manifest, entries.to_string()).unwrap();
    let out_dir = dir.path().join("r");
    assert!(run(&manifest, &out_dir, &[]).status.success());
    let out = odbench(&["report", "--out", path(&out_dir), "--format", "svg"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("boxplots.csv")).unwrap();
    let best = csv.lines().nth(1).unwrap();
    assert!(
        best.contains(",100.000000,100.000000,100.000000,100.000000,100.000000,100.000000,"),
        "{best}"
    );
    assert!(out_dir.join("boxplots.svg").exists());
}

#[test]
fn report_without_results_fails() {
    let dir = TempDir::new().unwrap();
    let out = odbench(&["report", "--out", path(dir.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("auc_matrix.csv"));
}

#[test]
fn stats_and_clustermap_on_the_bundled_matrix() {
    let dir = TempDir::new().unwrap();
    let out = odbench(&["stats", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("significance.txt")).unwrap();
    assert!(text.starts_with("Iman-Davenport F = 17.9"));
    let nemenyi = fs::read_to_string(dir.path().join("nemenyi.csv")).unwrap();
    let (names, p) = square_matrix_from_csv(&nemenyi, &dir.path().join("nemenyi.csv")).unwrap();
    assert_eq!(names.len(), 32);
    assert_eq!(p, p.t());

    let out = odbench(&["clustermap", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let svg = fs::read_to_string(dir.path().join("clustermap.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn unknown_algorithm_is_rejected() {
    let dir = TempDir::new().unwrap();
    let manifest = fixture_manifest(dir.path(), false);
    let out = run(
        &manifest,
        &dir.path().join("r"),
        &["--algorithms", "kNN,SVM"],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown algorithm `SVM`"));
}

#[test]
fn every_detector_runs_after_a_column_is_dropped() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("a,constant,b,c,label\n");
    for i in 0..90 {
        let t = i as f64;
        let (a, b, c) = (
            (t * 0.37).sin(),
            (t * 0.11).cos() * 2.0,
            (t * 0.73).sin() * (t * 0.05).cos(),
        );
        csv.push_str(&format!("{a},1.5,{b},{c},0\n"));
    }
    for i in 0..6 {
        csv.push_str(&format!("{},1.5,{},{},1\n", 4.0 + i as f64, -5.0, 3.0));
    }
    fs::write(dir.path().join("d.csv"), csv).unwrap();
    let manifest = dir.path().join("manifest.json");
    fs::write(&manifest, r#"[{"name": "d", "path": "d.csv"}]"#).unwrap();
    let out_dir = dir.path().join("r");
    let out = odbench(&[
        "run",
        "--manifest",
        path(&manifest),
        "--out",
        path(&out_dir),
        "--repeats",
        "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let auc = AucMatrix::read_csv(&out_dir.join("auc_matrix.csv")).unwrap();
    assert_eq!(auc.n_algorithms(), 19);
    let report = fs::read_to_string(out_dir.join("preprocess/d.json")).unwrap();
    assert!(
        report.contains("\"columns_dropped\": [\n    1\n  ]"),
        "{report}"
    );
}
