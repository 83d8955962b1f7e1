//! Embedding-based topic coherence: the mean pairwise cosine similarity of a
//! topic's words under pretrained word vectors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topics::TopicSet;

/// Term → vector map loaded from a text embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    duplicates: Vec<String>,
}

impl WordVectorStore {
    pub fn new(dim: usize) -> Self {
        WordVectorStore {
            dim,
            vectors: HashMap::new(),
            duplicates: Vec::new(),
        }
    }

    /// Adds a vector; returns `false` (and keeps the existing one) if the term is already present.
    pub fn insert(&mut self, term: impl Into<String>, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        let term = term.into();
        if term.is_empty() {
            return Err(Error::InvalidConfig("embedding term is empty".into()));
        }
        if self.vectors.contains_key(&term) {
            self.duplicates.push(term);
            return Ok(false);
        }
        self.vectors.insert(term, vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    /// Terms that appeared more than once in the source; the first vector was kept.
    pub fn duplicates(&self) -> &[String] {
        &self.duplicates
    }
}

fn parse_header(fields: &[&str]) -> Option<(usize, usize)> {
    match fields {
        [count, dim] => Some((count.parse().ok()?, dim.parse().ok()?)),
        _ => None,
    }
}

/// Parses the word2vec/GloVe text format: an optional `count dim` header,
/// then one `term v₁ … v_dim` line per term. Blank lines are skipped.
pub fn parse_word_vectors<R: BufRead>(input: R, expected_dim: Option<usize>) -> Result<WordVectorStore> {
    let mut store: Option<WordVectorStore> = None;
    let mut declared: Option<usize> = None;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<embeddings>", e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if store.is_none() {
            if let Some((count, dim)) = parse_header(&fields) {
                if let Some(expected) = expected_dim.filter(|&e| e != dim) {
                    return Err(Error::DimMismatch { expected, found: dim });
                }
                declared = Some(count);
                store = Some(WordVectorStore::new(dim));
                continue;
            }
            let dim = fields.len() - 1;
            if let Some(expected) = expected_dim.filter(|&e| e != dim) {
                return Err(Error::DimMismatch { expected, found: dim });
            }
            store = Some(WordVectorStore::new(dim));
        }
        let store = store.as_mut().expect("initialized above");
        if fields.len() != store.dim + 1 {
            return Err(Error::MalformedLine {
                line: line_no,
                expected: store.dim + 1,
                found: fields.len(),
            });
        }
        let vector: Vec<f64> = fields[1..]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: "<embeddings>".into(),
                line: line_no,
                message: e.to_string(),
            })?;
        if !store.insert(fields[0], vector)? {
            log::warn!(
                "line {line_no}: duplicate term {:?}, keeping the first vector",
                fields[0]
            );
        }
    }
    let store = store.unwrap_or_else(|| WordVectorStore::new(expected_dim.unwrap_or(0)));
    if let Some(count) = declared {
        let seen = store.len() + store.duplicates.len();
        if count != seen {
            log::warn!("embedding header declares {count} vectors, file has {seen}");
        }
    }
    Ok(store)
}

pub fn load_word_vectors(path: &Path, expected_dim: Option<usize>) -> Result<WordVectorStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_word_vectors(BufReader::new(file), expected_dim).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        },
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// `u·v / (‖u‖ ‖v‖)`, clamped to `[−1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Coherence of one topic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicScore {
    pub score: f64,
    /// Topic words that had an embedding.
    pub words_found: usize,
}

/// Mean cosine similarity over all unordered pairs of the topic words present
/// in `store`. Words without an embedding are skipped individually; at least
/// two must remain. Pairs are summed in a fixed `(i < j)` order.
pub fn tc_w2v(words: &[impl AsRef<str>], store: &WordVectorStore) -> Result<TopicScore> {
    let known: Vec<&[f64]> = words.iter().filter_map(|w| store.get(w.as_ref())).collect();
    let n = known.len();
    if n < 2 {
        return Err(Error::TooFewKnownWords { found: n });
    }
    let mut total = 0.0;
    for j in 1..n {
        for i in 0..j {
            total += cosine(known[j], known[i])?;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(TopicScore {
        score: (total / pairs).clamp(-1.0, 1.0),
        words_found: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCoherence {
    pub topic: usize,
    pub score: f64,
    pub words_found: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub per_topic: Vec<TopicCoherence>,
    /// Mean over scored topics; `None` when no topic could be scored.
    pub mean_score: Option<f64>,
    /// Topics with fewer than two words in the embedding vocabulary.
    pub skipped_topics: Vec<usize>,
}

/// Scores every topic of `topics` and averages over those that could be scored.
pub fn evaluate(topics: &TopicSet, store: &WordVectorStore) -> CoherenceReport {
    let mut per_topic = Vec::new();
    let mut skipped_topics = Vec::new();
    for (index, topic) in topics.topics.iter().enumerate() {
        match tc_w2v(&topic.terms(), store) {
            Ok(s) => per_topic.push(TopicCoherence {
                topic: index,
                score: s.score,
                words_found: s.words_found,
            }),
            Err(_) => skipped_topics.push(index),
        }
    }
    let mean_score =
        (!per_topic.is_empty()).then(|| per_topic.iter().map(|t| t.score).sum::<f64>() / per_topic.len() as f64);
    CoherenceReport {
        per_topic,
        mean_score,
        skipped_topics,
    }
}
