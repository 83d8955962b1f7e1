//! Topic detection pipelines.
//!
//! Both pipelines map documents into a low-dimensional space, cluster them
//! there with fuzzy c-means, map the centroids back to term space and clip
//! negative weights to zero. Each rectified centroid is a topic, summarized by
//! its heaviest terms.
//!
//! * DFCM: the space is the code layer of a deep autoencoder; centroids are
//!   mapped back through the decoder.
//! * EFCM: the space is spanned by the top right singular vectors of the
//!   document-term matrix; centroids are mapped back by `C · Vᵀ`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::autoencoder::{
    build_autoencoder_with_hidden, fine_tune, greedy_pretrain, AutoencoderModel, TrainConfig, DEFAULT_HIDDEN,
};
use crate::error::{Error, Result};
use crate::fcm::{fcm_fit, FcmConfig, FcmResult};
use crate::seed::{derive_seed, stage};
use crate::svd::{back_project, project, truncated_svd_with, SvdMethod, TruncatedSvd};
use crate::textprep::{DocTermMatrix, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dfcm,
    Efcm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dfcm => "dfcm",
            Method::Efcm => "efcm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dfcm" => Ok(Method::Dfcm),
            "efcm" => Ok(Method::Efcm),
            other => Err(Error::InvalidConfig(format!(
                "method: expected \"dfcm\" or \"efcm\", got {other:?}"
            ))),
        }
    }
}

/// Settings for one detection run. The number of topics is `fcm.clusters`.
///
/// The stage seeds inside `fcm` and `train` are ignored; every stage derives
/// its seed from `seed` (see [`crate::seed`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: Method,
    /// Dimension `p` of the clustering space.
    pub code_dim: usize,
    pub fcm: FcmConfig,
    /// Autoencoder training; unused by EFCM.
    pub train: TrainConfig,
    /// Encoder hidden layer widths; the decoder mirrors them.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Words reported per topic.
    pub top_n: usize,
    pub seed: u64,
    /// Decomposition route for EFCM.
    #[serde(default)]
    pub svd: SvdMethod,
}

fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

impl PipelineConfig {
    pub fn new(method: Method, code_dim: usize, topics: usize, seed: u64) -> Self {
        PipelineConfig {
            method,
            code_dim,
            fcm: FcmConfig {
                clusters: topics,
                ..FcmConfig::default()
            },
            train: TrainConfig::default(),
            hidden: default_hidden(),
            top_n: 10,
            seed,
            svd: SvdMethod::default(),
        }
    }

    pub fn topics(&self) -> usize {
        self.fcm.clusters
    }

    pub fn validate(&self) -> Result<()> {
        if self.code_dim < 1 {
            return Err(Error::InvalidConfig("code_dim must be at least 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer widths must be at least 1".into()));
        }
        if self.top_n < 1 {
            return Err(Error::InvalidConfig("top_n must be at least 1".into()));
        }
        self.fcm.validate()?;
        if self.method == Method::Dfcm {
            self.train.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicWord {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topic {
    /// Row of the topic vector in [`Detection::topic_vectors`].
    pub id: usize,
    /// Heaviest terms, by nonincreasing weight.
    pub words: Vec<TopicWord>,
}

impl Topic {
    pub fn terms(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.term.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicSet {
    pub method: Method,
    pub config: PipelineConfig,
    pub topics: Vec<Topic>,
    /// Topics reported with fewer than `top_n` words.
    pub warnings: Vec<String>,
}

/// Everything a detection run produces.
#[derive(Debug, Clone)]
pub struct Detection {
    pub topic_set: TopicSet,
    /// Rectified topic vectors, `c × n_terms`.
    pub topic_vectors: Array2<f64>,
    /// Document coordinates in the clustering space, `n_docs × p`.
    pub codes: Array2<f64>,
    pub fcm: FcmResult,
    /// Trained autoencoder (DFCM only).
    pub model: Option<AutoencoderModel>,
    pub pretrain_traces: Vec<Vec<f64>>,
    pub finetune_trace: Vec<f64>,
    /// Eigenspace basis (EFCM only).
    pub svd: Option<TruncatedSvd>,
}

/// Ranked words of one topic vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedWords {
    pub words: Vec<TopicWord>,
    /// Set when fewer than `n` strictly positive weights exist.
    pub warning: Option<String>,
}

/// The `n` terms with the largest strictly positive weights, heaviest first,
/// ties broken by term order.
pub fn extract_top_words(weights: ArrayView1<f64>, vocab: &Vocabulary, n: usize) -> Result<RankedWords> {
    if weights.len() != vocab.len() {
        return Err(Error::DimensionMismatch {
            context: "topic vector length",
            expected: vocab.len(),
            found: weights.len(),
        });
    }
    let mut ranked: Vec<(usize, f64)> = weights.iter().copied().enumerate().filter(|&(_, w)| w > 0.0).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| vocab.term(a.0).cmp(vocab.term(b.0))));
    let available = ranked.len();
    ranked.truncate(n);
    let warning = (available < n).then(|| format!("only {available} of {n} requested words have positive weight"));
    Ok(RankedWords {
        words: ranked
            .into_iter()
            .map(|(col, weight)| TopicWord {
                term: vocab.term(col).to_owned(),
                weight,
            })
            .collect(),
        warning,
    })
}

fn check_inputs(d: &DocTermMatrix, vocab: &Vocabulary, cfg: &PipelineConfig, method: Method) -> Result<()> {
    if cfg.method != method {
        return Err(Error::InvalidConfig(format!(
            "configuration is for {} but the {method} pipeline was called",
            cfg.method
        )));
    }
    cfg.validate()?;
    if d.n_docs() == 0 {
        return Err(Error::TooFewPoints {
            points: 0,
            clusters: cfg.topics(),
        });
    }
    if d.n_terms() != vocab.len() {
        return Err(Error::DimensionMismatch {
            context: "matrix columns vs vocabulary",
            expected: vocab.len(),
            found: d.n_terms(),
        });
    }
    Ok(())
}

fn fcm_config(cfg: &PipelineConfig) -> FcmConfig {
    FcmConfig {
        seed: derive_seed(cfg.seed, stage::FCM_INIT),
        ..cfg.fcm.clone()
    }
}

/// Clips negative weights, rejects all-zero topics and ranks the words.
fn rectify_and_rank(
    mut decoded: Array2<f64>,
    vocab: &Vocabulary,
    cfg: &PipelineConfig,
) -> Result<(Array2<f64>, Vec<Topic>, Vec<String>)> {
    decoded.mapv_inplace(|v| v.max(0.0));
    let degenerate: Vec<usize> = decoded
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(_, row)| row.iter().all(|&v| v == 0.0))
        .map(|(i, _)| i)
        .collect();
    if !degenerate.is_empty() {
        return Err(Error::DegenerateTopics(degenerate));
    }
    let mut topics = Vec::with_capacity(decoded.nrows());
    let mut warnings = Vec::new();
    for (id, row) in decoded.rows().into_iter().enumerate() {
        let ranked = extract_top_words(row, vocab, cfg.top_n)?;
        if let Some(w) = ranked.warning {
            warnings.push(format!("topic {id}: {w}"));
        }
        topics.push(Topic {
            id,
            words: ranked.words,
        });
    }
    Ok((decoded, topics, warnings))
}

/// Autoencoder representation, fuzzy clustering in code space, decoded and
/// rectified centroids.
pub fn dfcm_detect(d: &DocTermMatrix, vocab: &Vocabulary, cfg: &PipelineConfig) -> Result<Detection> {
    check_inputs(d, vocab, cfg, Method::Dfcm)?;
    let mut model = build_autoencoder_with_hidden(
        d.n_terms(),
        &cfg.hidden,
        cfg.code_dim,
        derive_seed(cfg.seed, stage::AUTOENCODER_INIT),
    )?;
    let train = TrainConfig {
        seed: derive_seed(cfg.seed, stage::AUTOENCODER_TRAIN),
        ..cfg.train.clone()
    };
    let pretrain_traces = greedy_pretrain(&mut model, d, &train)?;
    let finetune_trace = fine_tune(&mut model, d, &train)?;
    let codes = model.encode_rows(d)?;
    let fcm = fcm_fit(codes.view(), &fcm_config(cfg), None)?;
    let decoded = model.decode(fcm.centroids.values().view())?;
    let (topic_vectors, topics, warnings) = rectify_and_rank(decoded, vocab, cfg)?;
    Ok(Detection {
        topic_set: TopicSet {
            method: Method::Dfcm,
            config: cfg.clone(),
            topics,
            warnings,
        },
        topic_vectors,
        codes,
        fcm,
        model: Some(model),
        pretrain_traces,
        finetune_trace,
        svd: None,
    })
}

/// Truncated-SVD eigenspace, fuzzy clustering there, back-projected and
/// rectified centroids.
pub fn efcm_detect(d: &DocTermMatrix, vocab: &Vocabulary, cfg: &PipelineConfig) -> Result<Detection> {
    check_inputs(d, vocab, cfg, Method::Efcm)?;
    let svd = truncated_svd_with(d, cfg.code_dim, derive_seed(cfg.seed, stage::SVD), cfg.svd)?;
    let codes = project(d, &svd)?;
    let fcm = fcm_fit(codes.view(), &fcm_config(cfg), None)?;
    let decoded = back_project(fcm.centroids.values().view(), &svd)?;
    let (topic_vectors, topics, warnings) = rectify_and_rank(decoded, vocab, cfg)?;
    Ok(Detection {
        topic_set: TopicSet {
            method: Method::Efcm,
            config: cfg.clone(),
            topics,
            warnings,
        },
        topic_vectors,
        codes,
        fcm,
        model: None,
        pretrain_traces: Vec::new(),
        finetune_trace: Vec::new(),
        svd: Some(svd),
    })
}

/// Runs the pipeline selected by `cfg.method`.
pub fn detect(d: &DocTermMatrix, vocab: &Vocabulary, cfg: &PipelineConfig) -> Result<Detection> {
    match cfg.method {
        Method::Dfcm => dfcm_detect(d, vocab, cfg),
        Method::Efcm => efcm_detect(d, vocab, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::collections::HashSet;

    fn vocab(terms: &[&str]) -> Vocabulary {
        let corpus = vec![terms.iter().map(|t| t.to_string()).collect::<Vec<_>>()];
        crate::textprep::build_vocabulary_with_threshold(&corpus, &HashSet::new(), 1).unwrap()
    }

    #[test]
    fn top_words_sorting() {
        let v = vocab(&["a", "b", "c", "d"]);
        let r = extract_top_words(array![0.1, 0.9, 0.5, 0.0].view(), &v, 2).unwrap();
        let got: Vec<(&str, f64)> = r.words.iter().map(|w| (w.term.as_str(), w.weight)).collect();
        assert_eq!(got, vec![("b", 0.9), ("c", 0.5)]);
        assert!(r.warning.is_none());
    }

    #[test]
    fn top_words_one_hot_and_ties() {
        let v = vocab(&["a", "b", "c"]);
        let r = extract_top_words(array![0.0, 1.0, 0.0].view(), &v, 10).unwrap();
        assert_eq!(
            r.words,
            vec![TopicWord {
                term: "b".into(),
                weight: 1.0
            }]
        );
        assert!(r.warning.is_some());
        let r = extract_top_words(array![0.7, 0.2, 0.7].view(), &v, 2).unwrap();
        assert_eq!(r.words[0].term, "a");
        assert_eq!(r.words[1].term, "c");
        assert!(extract_top_words(array![1.0].view(), &v, 1).is_err());
    }

    #[test]
    fn degenerate_topics_are_reported() {
        let v = vocab(&["a", "b"]);
        let cfg = PipelineConfig::new(Method::Efcm, 1, 2, 0);
        let decoded = array![[1.0, -1.0], [-0.5, -2.0]];
        assert!(matches!(rectify_and_rank(decoded, &v, &cfg), Err(Error::DegenerateTopics(ref t)) if t == &vec![1]));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("dfcm".parse::<Method>().unwrap(), Method::Dfcm);
        let err = "lda".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("method"));
    }

    #[test]
    fn efcm_smallest_instance() {
        let v = vocab(&["a", "b", "c"]);
        let d = DocTermMatrix::from_dense(array![[1.0, 2.0, 0.0], [0.0, 1.0, 3.0]].view()).unwrap();
        let cfg = PipelineConfig::new(Method::Efcm, 1, 1, 5);
        let det = efcm_detect(&d, &v, &cfg).unwrap();
        assert_eq!(det.topic_set.topics.len(), 1);
        assert!(det.topic_vectors.iter().all(|&w| w >= 0.0));
        assert!(matches!(dfcm_detect(&d, &v, &cfg), Err(Error::InvalidConfig(_))));
    }
}
