mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn embdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embdyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn csv_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            header
                .iter()
                .zip(r.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn validate_exit_codes() {
    let synthetic = fixture("synthetic.jsonl");
    let out = embdyn(&["validate", "--corpus", synthetic.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("30 samples, dim 16"));

    let out = embdyn(&["validate", "--corpus", "/no/such/corpus.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("corpus not found"));

    let mixed = fixture("mixed_dim.jsonl");
    let out = embdyn(&["validate", "--corpus", mixed.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("inconsistent embedding dimension"));

    let bad = fixture("bad_schema.jsonl");
    assert_eq!(
        code(&embdyn(&["validate", "--corpus", bad.to_str().unwrap()])),
        3
    );

    let issues = fixture("with_issues.jsonl");
    let out = embdyn(&["validate", "--corpus", issues.to_str().unwrap(), "-v"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("line 4"));
    assert!(stderr(&out).contains("too few sentences"));
}

#[test]
fn empty_and_all_skipped_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = embdyn(&["validate", "--corpus", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("empty corpus"));

    let skipped = fixture("all_skipped.jsonl");
    let out_dir = dir.path().join("out");
    let out = embdyn(&[
        "report",
        "--corpus",
        skipped.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("no analyzable samples"));
}

#[test]
fn eigs_on_single_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("half_decay.jsonl");
    let out = embdyn(&[
        "eigs",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "-q",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let summary = csv_rows(&dir.path().join("eigs_summary.csv"));
    assert_eq!(summary.len(), 6);
    let accurate: Vec<_> = summary
        .iter()
        .filter(|r| r["label"] == "accurate")
        .collect();
    assert_eq!(accurate.len(), 2);
    for row in accurate {
        assert_eq!(row["n_eigs"], "1");
        assert_eq!(row["complex_fraction"], "0");
        assert_eq!(row["inside_fraction"], "1");
    }
    let eigs = csv_rows(&dir.path().join("eigs.csv"));
    assert_eq!(eigs.len(), 2);
    for row in &eigs {
        let re: f64 = row["re"].parse().unwrap();
        assert!((re - 0.5).abs() < 1e-12);
        assert_eq!(row["circle_class"], "inside");
        assert_eq!(row["is_complex"], "false");
    }
}

#[test]
fn fixed_rank_one_gives_one_eigenvalue_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("synthetic.jsonl");
    let out = embdyn(&[
        "eigs",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--rank",
        "1",
        "-q",
    ]);
    assert_eq!(code(&out), 0);
    let eigs = csv_rows(&dir.path().join("eigs.csv"));
    let mut per_sample: BTreeMap<(String, String), usize> = BTreeMap::new();
    for row in &eigs {
        *per_sample
            .entry((row["source"].clone(), row["sample_id"].clone()))
            .or_default() += 1;
    }
    assert_eq!(per_sample.len(), 60);
    assert!(per_sample.values().all(|&n| n == 1));
}

#[test]
fn report_equals_union_of_individual_commands() {
    let corpus = fixture("synthetic.jsonl");
    let corpus = corpus.to_str().unwrap();
    let report_dir = tempfile::tempdir().unwrap();
    let single_dir = tempfile::tempdir().unwrap();

    let out = embdyn(&[
        "report",
        "--corpus",
        corpus,
        "--out",
        report_dir.path().to_str().unwrap(),
        "-q",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for cmd in ["spectrum", "eigs", "dynamics"] {
        let out = embdyn(&[
            cmd,
            "--corpus",
            corpus,
            "--out",
            single_dir.path().to_str().unwrap(),
            "-q",
        ]);
        assert_eq!(code(&out), 0);
    }
    let mut report = read_dir(report_dir.path());
    let manifest = report.remove("manifest.json").expect("manifest written");
    assert_eq!(report, read_dir(single_dir.path()));

    let manifest: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    let listed: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    let produced: Vec<&str> = report.keys().map(String::as_str).collect();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort();
    assert_eq!(listed_sorted, produced);
    assert_eq!(manifest["config"]["rank"], "optimal");
    assert_eq!(manifest["corpus"]["samples"], 30);
}

#[test]
fn paragraph_spectrum_is_flagged_in_manifest() {
    let corpus = fixture("synthetic.jsonl");
    let dir = tempfile::tempdir().unwrap();
    let out = embdyn(&[
        "report",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--spectrum-on",
        "paragraph",
        "--format",
        "json",
        "-q",
    ]);
    assert_eq!(code(&out), 0);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let spectrum = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["kind"] == "spectrum")
        .unwrap();
    assert_eq!(spectrum["path"], "spectrum.json");
    assert_eq!(spectrum["spectrum_on"], "paragraph");

    // Paragraph spectra have one more singular value than snapshot spectra
    // whenever P <= N, which holds for every fixture paragraph.
    let rows: Vec<serde_json::Value> =
        serde_json::from_slice(&fs::read(dir.path().join("spectrum.json")).unwrap()).unwrap();
    let max_index = rows
        .iter()
        .filter(|r| r["source"] == "reference")
        .map(|r| r["index"].as_u64().unwrap())
        .max()
        .unwrap();
    assert_eq!(max_index, 10); // longest reference paragraph has 11 sentences
}

#[test]
fn config_file_is_used_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    let corpus = fixture("half_decay.jsonl");
    fs::write(
        &config,
        format!(
            "corpus = {:?}\nout = {:?}\nformat = \"json\"\n",
            corpus.to_str().unwrap(),
            dir.path().join("from_config").to_str().unwrap()
        ),
    )
    .unwrap();
    let out = embdyn(&["spectrum", "--config", config.to_str().unwrap(), "-q"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("from_config/spectrum.json").exists());

    let out = embdyn(&[
        "spectrum",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "csv",
        "-q",
    ]);
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("from_config/spectrum.csv").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&embdyn(&["frobnicate"])), 1);
    assert_eq!(code(&embdyn(&["eigs", "--rank", "zero"])), 1);
    assert_eq!(code(&embdyn(&["--help"])), 0);
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let corpus = fixture("half_decay.jsonl");
    let out = embdyn(&[
        "spectrum",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}
