//! The four subcommands, independent of argument parsing.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use dfcm_core::autoencoder::{write_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
use dfcm_core::coherence::{evaluate as score_topics, load_word_vectors, CoherenceReport, WordVectorStore};
use dfcm_core::seed::derive_seed;
use dfcm_core::textprep::{
    load_stopwords, parse_stopwords, read_corpus_jsonl, vectorize_documents, DocTermMatrix, Vocabulary, STOPWORDS_EN,
    STOPWORDS_ID,
};
use dfcm_core::topics::{detect as run_pipeline, Detection, TopicSet};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const VOCABULARY_FILE: &str = "vocabulary.json";
pub const MATRIX_FILE: &str = "matrix.txt";
pub const DOCUMENTS_FILE: &str = "documents.json";
pub const TOPICS_FILE: &str = "topics.json";
pub const MEMBERSHIPS_FILE: &str = "memberships.json";
pub const TRACE_FILE: &str = "fcm_trace.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const MODEL_META_FILE: &str = "model.json";
pub const TRAINING_FILE: &str = "training.json";
pub const COHERENCE_FILE: &str = "coherence.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const LOG_FILE: &str = "run.log";

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(dfcm_core::Error::from)?;
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(dfcm_core::Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    })
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Run log; the only output that carries timestamps.
struct RunLog {
    path: PathBuf,
    lines: Vec<String>,
}

impl RunLog {
    fn start(dir: &Path, command: &str) -> Self {
        RunLog {
            path: dir.join(LOG_FILE),
            lines: vec![format!("{} start {command}", unix_time())],
        }
    }

    fn note(&mut self, line: impl Into<String>) {
        self.lines.push(format!("{} {}", unix_time(), line.into()));
    }

    fn finish(mut self) -> CliResult<()> {
        self.note("done");
        let mut text = self.lines.join("\n");
        text.push('\n');
        write_file(&self.path, text)
    }
}

/// Resolves `en`, `id`, `none` or a file path to a stopword set.
pub fn resolve_stopwords(spec: &str) -> CliResult<HashSet<String>> {
    Ok(match spec {
        "en" => parse_stopwords(STOPWORDS_EN),
        "id" => parse_stopwords(STOPWORDS_ID),
        "none" => HashSet::new(),
        path => load_stopwords(Path::new(path))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorizeSummary {
    pub n_docs: usize,
    pub n_terms: usize,
    pub nnz: usize,
}

/// Cleans and vectorizes a JSON-lines corpus into `out_dir`.
pub fn vectorize(corpus: &Path, stopwords: &str, out_dir: &Path) -> CliResult<VectorizeSummary> {
    let docs = read_corpus_jsonl(corpus)?;
    let stop = resolve_stopwords(stopwords)?;
    let (vocab, matrix) = vectorize_documents(&docs, &stop)?;
    create_dir(out_dir)?;
    write_file(&out_dir.join(VOCABULARY_FILE), vocab.to_json()? + "\n")?;
    matrix.save(&out_dir.join(MATRIX_FILE))?;
    let ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    write_json(&out_dir.join(DOCUMENTS_FILE), &ids)?;
    Ok(VectorizeSummary {
        n_docs: matrix.n_docs(),
        n_terms: matrix.n_terms(),
        nnz: matrix.nnz(),
    })
}

/// Output of `vectorize`, read back for detection.
pub struct VectorizedCorpus {
    pub vocabulary: Vocabulary,
    pub matrix: DocTermMatrix,
    pub documents: Vec<String>,
}

pub fn load_vectorized(dir: &Path) -> CliResult<VectorizedCorpus> {
    let vocab_path = dir.join(VOCABULARY_FILE);
    let text = fs::read_to_string(&vocab_path).map_err(|e| CliError::io(&vocab_path, e))?;
    let vocabulary = Vocabulary::from_json(&text)?;
    let matrix = DocTermMatrix::load(&dir.join(MATRIX_FILE))?;
    let documents: Vec<String> = read_json(&dir.join(DOCUMENTS_FILE))?;
    if documents.len() != matrix.n_docs() {
        return Err(dfcm_core::Error::DimensionMismatch {
            context: "document ids vs matrix rows",
            expected: matrix.n_docs(),
            found: documents.len(),
        }
        .into());
    }
    if vocabulary.len() != matrix.n_terms() {
        return Err(dfcm_core::Error::DimensionMismatch {
            context: "vocabulary vs matrix columns",
            expected: vocabulary.len(),
            found: matrix.n_terms(),
        }
        .into());
    }
    Ok(VectorizedCorpus {
        vocabulary,
        matrix,
        documents,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MembershipFile {
    pub documents: Vec<String>,
    /// `memberships[i][k]`: degree of document `k` in topic `i`.
    pub memberships: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceFile {
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainingFile {
    pub pretrain: Vec<Vec<f64>>,
    pub finetune: Vec<f64>,
}

fn write_detection(det: &Detection, documents: &[String], out_dir: &Path) -> CliResult<()> {
    write_json(&out_dir.join(TOPICS_FILE), &det.topic_set)?;
    let memberships = MembershipFile {
        documents: documents.to_vec(),
        memberships: det
            .fcm
            .memberships
            .values()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
    };
    write_json(&out_dir.join(MEMBERSHIPS_FILE), &memberships)?;
    let trace = TraceFile {
        objective: det.fcm.objective_trace.clone(),
        iterations: det.fcm.iterations,
        converged: det.fcm.converged,
    };
    write_json(&out_dir.join(TRACE_FILE), &trace)?;
    if let Some(model) = &det.model {
        let path = out_dir.join(CHECKPOINT_FILE);
        let mut bytes = Vec::new();
        write_checkpoint(model, &mut bytes).map_err(|e| CliError::io(&path, e))?;
        write_file(&path, bytes)?;
        let meta = CheckpointMeta {
            format_version: CHECKPOINT_VERSION,
            train_config: det.topic_set.config.train.clone(),
            final_loss: det.finetune_trace.last().copied(),
        };
        write_json(&out_dir.join(MODEL_META_FILE), &meta)?;
        let training = TrainingFile {
            pretrain: det.pretrain_traces.clone(),
            finetune: det.finetune_trace.clone(),
        };
        write_json(&out_dir.join(TRAINING_FILE), &training)?;
    }
    Ok(())
}

/// Runs the configured pipeline on the vectorized corpus in `input_dir`.
pub fn detect(cfg: &RunConfig, seed: u64, input_dir: &Path, out_dir: &Path) -> CliResult<TopicSet> {
    let pipeline = cfg.pipeline(seed);
    pipeline.validate()?;
    let corpus = load_vectorized(input_dir)?;
    create_dir(out_dir)?;
    let mut log = RunLog::start(out_dir, "detect");
    log.note(format!(
        "method={} documents={} terms={} clusters={} seed={seed}",
        pipeline.method,
        corpus.matrix.n_docs(),
        corpus.matrix.n_terms(),
        pipeline.topics()
    ));
    let det = run_pipeline(&corpus.matrix, &corpus.vocabulary, &pipeline)?;
    for w in &det.topic_set.warnings {
        log::warn!("{w}");
        log.note(format!("warning: {w}"));
    }
    write_detection(&det, &corpus.documents, out_dir)?;
    log.finish()?;
    Ok(det.topic_set)
}

fn load_store(embeddings: &Path, dim: Option<usize>) -> CliResult<WordVectorStore> {
    Ok(load_word_vectors(embeddings, dim)?)
}

/// Scores a saved topic set against word embeddings and writes the report.
pub fn evaluate(topics: &Path, embeddings: &Path, dim: Option<usize>, out: &Path) -> CliResult<CoherenceReport> {
    let topic_set: TopicSet = read_json(topics)?;
    let store = load_store(embeddings, dim)?;
    let report = score_topics(&topic_set, &store);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(out, &report)?;
    Ok(report)
}

/// One cell of the comparison grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: dfcm_core::topics::Method,
    pub code_dim: usize,
    pub clusters: usize,
    pub epochs: usize,
    pub seed: u64,
    /// `Ok(report)` or the error message of a failed cell.
    pub outcome: Result<CoherenceReport, String>,
}

impl CompareRow {
    pub fn mean_score(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|r| r.mean_score)
    }
}

/// Seed of one comparison cell, derived from the global seed and the cell
/// coordinates.
pub fn cell_seed(seed: u64, method: dfcm_core::topics::Method, clusters: usize, epochs: usize) -> u64 {
    derive_seed(seed, &format!("compare/{method}/{clusters}/{epochs}"))
}

/// Runs every (method, topics, epochs) cell, scores it and writes the CSV
/// table plus each cell's topics. Failed cells are recorded and skipped.
pub fn compare(
    cfg: &RunConfig,
    seed: u64,
    input_dir: &Path,
    embeddings: &Path,
    out_dir: &Path,
) -> CliResult<Vec<CompareRow>> {
    let grid = &cfg.compare;
    if grid.methods.is_empty() || grid.clusters.is_empty() || grid.epochs.is_empty() {
        return Err(CliError::Usage(
            "compare needs at least one method, topic count and epoch count".into(),
        ));
    }
    let corpus = load_vectorized(input_dir)?;
    let store = load_store(embeddings, cfg.embedding_dim)?;
    let cells_dir = out_dir.join("cells");
    create_dir(&cells_dir)?;
    let mut log = RunLog::start(out_dir, "compare");
    let mut rows = Vec::new();
    for &method in &grid.methods {
        for &clusters in &grid.clusters {
            for &epochs in &grid.epochs {
                let cell_seed = cell_seed(seed, method, clusters, epochs);
                let mut cell = cfg.clone();
                cell.method = method;
                cell.clusters = clusters;
                cell.epochs = epochs;
                let pipeline = cell.pipeline(cell_seed);
                let outcome = pipeline
                    .validate()
                    .and_then(|()| run_pipeline(&corpus.matrix, &corpus.vocabulary, &pipeline))
                    .map(|det| {
                        let report = score_topics(&det.topic_set, &store);
                        (det.topic_set, report)
                    });
                let name = format!("{method}_c{clusters}_e{epochs}");
                let outcome = match outcome {
                    Ok((topic_set, report)) => {
                        write_json(&cells_dir.join(format!("{name}.topics.json")), &topic_set)?;
                        write_json(&cells_dir.join(format!("{name}.coherence.json")), &report)?;
                        log.note(format!("{name} ok mean={:?}", report.mean_score));
                        Ok(report)
                    }
                    Err(e) => {
                        log::warn!("cell {name} failed: {e}");
                        log.note(format!("{name} failed: {e}"));
                        Err(e.to_string())
                    }
                };
                rows.push(CompareRow {
                    method,
                    code_dim: cfg.code_dim,
                    clusters,
                    epochs,
                    seed: cell_seed,
                    outcome,
                });
            }
        }
    }
    write_comparison(&out_dir.join(COMPARISON_FILE), &rows)?;
    log.finish()?;
    Ok(rows)
}

fn write_comparison(path: &Path, rows: &[CompareRow]) -> CliResult<()> {
    let widest = rows.iter().map(|r| r.clusters).max().unwrap_or(0);
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["method", "p", "c", "epochs", "seed", "status", "mean_score"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..widest).map(|i| format!("topic_{i}")));
    out.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.method.to_string(),
            row.code_dim.to_string(),
            row.clusters.to_string(),
            row.epochs.to_string(),
            row.seed.to_string(),
        ];
        let mut scores = vec![String::new(); widest];
        match &row.outcome {
            Ok(report) => {
                record.push("ok".into());
                record.push(report.mean_score.map(|m| m.to_string()).unwrap_or_default());
                for t in &report.per_topic {
                    scores[t.topic] = t.score.to_string();
                }
            }
            Err(message) => {
                record.push(format!("failed: {message}"));
                record.push(String::new());
            }
        }
        record.extend(scores);
        out.write_record(&record)?;
    }
    let bytes = out.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    write_file(path, bytes)
}
