use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dfcm_core::coherence::CoherenceReport;
use dfcm_core::synthetic::{planted_corpus, planted_embeddings_text};
use dfcm_core::topics::TopicSet;
use tempfile::TempDir;

fn dfcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfcm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the planted corpus and its embeddings; returns (corpus, embeddings).
fn planted_files(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let planted = planted_corpus(300, 3, 20, 15, seed);
    let corpus = dir.join("corpus.jsonl");
    let lines: Vec<String> = planted
        .documents
        .iter()
        .map(|d| serde_json::to_string(d).unwrap())
        .collect();
    fs::write(&corpus, lines.join("\n") + "\n").unwrap();
    let embeddings = dir.join("vectors.txt");
    fs::write(&embeddings, planted_embeddings_text(&planted.vocabularies)).unwrap();
    (corpus, embeddings)
}

fn vectorized(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let (corpus, embeddings) = planted_files(dir, seed);
    let vec_dir = dir.join("vec");
    let out = dfcm(&[
        "vectorize",
        "--corpus",
        path_str(&corpus),
        "--stopwords",
        "none",
        "--out",
        path_str(&vec_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (vec_dir, embeddings)
}

#[test]
fn vectorize_reports_counts_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("toy.jsonl");
    // "common" appears in all 12 documents, "half" in 10, "rare" in 9.
    let mut lines = Vec::new();
    for i in 0..12 {
        let mut text = String::from("common Common!");
        if i < 10 {
            text.push_str(" half");
        }
        if i < 9 {
            text.push_str(" rare");
        }
        text.push_str(" the");
        lines.push(format!(r#"{{"id": "d{i}", "text": "{text}"}}"#));
    }
    fs::write(&corpus, lines.join("\n")).unwrap();
    let run = |name: &str| {
        let out_dir = tmp.path().join(name);
        let out = dfcm(&["vectorize", "--corpus", path_str(&corpus), "--out", path_str(&out_dir)]);
        assert!(out.status.success());
        (String::from_utf8(out.stdout).unwrap(), out_dir)
    };
    let (stdout, a) = run("a");
    assert_eq!(stdout, "documents 12\nterms 2\nnonzeros 22\n");
    let (_, b) = run("b");
    for file in ["vocabulary.json", "matrix.txt", "documents.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
    }
}

#[test]
fn empty_corpus_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("empty.jsonl");
    fs::write(&corpus, "").unwrap();
    let out = dfcm(&[
        "vectorize",
        "--corpus",
        path_str(&corpus),
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_corpus_line_is_reported() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("bad.jsonl");
    fs::write(&corpus, "{\"id\": \"a\", \"text\": \"x\"}\nnot json\n").unwrap();
    let out = dfcm(&[
        "vectorize",
        "--corpus",
        path_str(&corpus),
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:2:"));
}

#[test]
fn detect_and_evaluate_efcm() {
    let tmp = TempDir::new().unwrap();
    let (vec_dir, embeddings) = vectorized(tmp.path(), 1);
    let out_dir = tmp.path().join("efcm");
    let out = dfcm(&[
        "detect",
        "--input",
        path_str(&vec_dir),
        "--out",
        path_str(&out_dir),
        "--seed",
        "4",
        "--method",
        "efcm",
        "--clusters",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let topics: TopicSet = serde_json::from_slice(&fs::read(out_dir.join("topics.json")).unwrap()).unwrap();
    assert_eq!(topics.topics.len(), 3);
    for file in ["memberships.json", "fcm_trace.json", "run.log"] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
    assert!(!out_dir.join("model.ckpt").exists());
    let out = dfcm(&[
        "evaluate",
        "--topics",
        path_str(&out_dir.join("topics.json")),
        "--embeddings",
        path_str(&embeddings),
    ]);
    assert!(out.status.success());
    let report: CoherenceReport = serde_json::from_slice(&fs::read(out_dir.join("coherence.json")).unwrap()).unwrap();
    assert!(report.mean_score.unwrap() >= 0.8);
}

#[test]
fn detect_dfcm_writes_a_loadable_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let (vec_dir, _) = vectorized(tmp.path(), 2);
    let out_dir = tmp.path().join("dfcm");
    let out = dfcm(&[
        "detect",
        "--input",
        path_str(&vec_dir),
        "--out",
        path_str(&out_dir),
        "--seed",
        "4",
        "--clusters",
        "3",
        "--hidden",
        "32,32,64",
        "--epochs",
        "5",
        "--batch-size",
        "32",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = fs::read(out_dir.join("model.ckpt")).unwrap();
    let model = dfcm_core::autoencoder::read_checkpoint(bytes.as_slice()).unwrap();
    assert_eq!(model.layer_dims(), vec![60, 32, 32, 64, 5]);
    assert!(out_dir.join("model.json").exists());
    assert!(out_dir.join("training.json").exists());
}

#[test]
fn compare_grid_has_one_row_per_cell() {
    let tmp = TempDir::new().unwrap();
    let (vec_dir, embeddings) = vectorized(tmp.path(), 3);
    let run = |name: &str| {
        let out_dir = tmp.path().join(name);
        let out = dfcm(&[
            "compare",
            "--input",
            path_str(&vec_dir),
            "--embeddings",
            path_str(&embeddings),
            "--out",
            path_str(&out_dir),
            "--seed",
            "8",
            "--methods",
            "dfcm,efcm",
            "--topic-counts",
            "2,3,4",
            "--epoch-counts",
            "3",
            "--hidden",
            "16,16,32",
            "--batch-size",
            "32",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(out_dir.join("comparison.csv")).unwrap()
    };
    let table = run("a");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("method,p,c,epochs,seed,status,mean_score,topic_0"));
    assert!(lines[1..].iter().all(|l| l.split(',').nth(5) == Some("ok")));
    assert_eq!(run("b"), table);
}

#[test]
fn compare_records_failed_cells_and_continues() {
    let tmp = TempDir::new().unwrap();
    let (vec_dir, embeddings) = vectorized(tmp.path(), 3);
    let out_dir = tmp.path().join("cmp");
    let out = dfcm(&[
        "compare",
        "--input",
        path_str(&vec_dir),
        "--embeddings",
        path_str(&embeddings),
        "--out",
        path_str(&out_dir),
        "--seed",
        "1",
        "--methods",
        "efcm",
        "--topic-counts",
        "3,500",
        "--epoch-counts",
        "1",
    ]);
    assert!(out.status.success());
    let table = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",ok,"));
    assert!(rows[1].contains("failed"));
}

#[test]
fn exit_codes_follow_error_kinds() {
    let tmp = TempDir::new().unwrap();
    let (vec_dir, _) = vectorized(tmp.path(), 5);
    let out_dir = tmp.path().join("x");
    let input = path_str(&vec_dir);
    let output = path_str(&out_dir);
    // Missing mandatory seed.
    assert_eq!(
        dfcm(&["detect", "--input", input, "--out", output]).status.code(),
        Some(1)
    );
    // Unknown method.
    assert_eq!(
        dfcm(&["detect", "--input", input, "--out", output, "--seed", "1", "--method", "lda"])
            .status
            .code(),
        Some(1)
    );
    // Invalid fuzzifier.
    let code = dfcm(&[
        "detect",
        "--input",
        input,
        "--out",
        output,
        "--seed",
        "1",
        "--fuzzifier",
        "1",
    ])
    .status
    .code();
    assert_eq!(code, Some(1));
    // Unknown config key.
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"clusterz": 3}"#).unwrap();
    let code = dfcm(&[
        "detect",
        "--config",
        path_str(&cfg),
        "--input",
        input,
        "--out",
        output,
        "--seed",
        "1",
    ])
    .status
    .code();
    assert_eq!(code, Some(1));
    // Missing input directory.
    assert_eq!(
        dfcm(&["detect", "--input", "/nonexistent", "--out", output, "--seed", "1"])
            .status
            .code(),
        Some(2)
    );
    // Diverging training.
    let code = dfcm(&[
        "detect",
        "--input",
        input,
        "--out",
        output,
        "--seed",
        "1",
        "--clusters",
        "3",
        "--hidden",
        "8",
        "--epochs",
        "3",
        "--optimizer",
        "sgd_momentum",
        "--learning-rate",
        "1e200",
    ])
    .status
    .code();
    assert_eq!(code, Some(3));
}

#[test]
fn config_file_supplies_settings() {
    let tmp = TempDir::new().unwrap();
    let (vec_dir, _) = vectorized(tmp.path(), 6);
    let out_dir = tmp.path().join("out");
    let cfg = tmp.path().join("run.json");
    let doc = serde_json::json!({
        "method": "efcm",
        "clusters": 2,
        "top_n": 4,
        "input_dir": vec_dir,
        "output_dir": out_dir,
    });
    fs::write(&cfg, doc.to_string()).unwrap();
    let out = dfcm(&["detect", "--config", path_str(&cfg), "--seed", "2", "--clusters", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let topics: TopicSet = serde_json::from_slice(&fs::read(out_dir.join("topics.json")).unwrap()).unwrap();
    assert_eq!(topics.topics.len(), 3);
    assert!(topics.topics.iter().all(|t| t.words.len() == 4));
}
