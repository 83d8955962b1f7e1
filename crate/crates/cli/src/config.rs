//! Run configuration: one JSON document covering every stage, with command
//! line flags layered on top.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use dfcm_core::autoencoder::{Optimizer, TrainConfig, DEFAULT_HIDDEN};
use dfcm_core::fcm::FcmConfig;
use dfcm_core::svd::SvdMethod;
use dfcm_core::topics::{Method, PipelineConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: Method,
    /// Dimension `p` of the clustering space.
    pub code_dim: usize,
    /// Number of topics `c`.
    pub clusters: usize,
    pub fuzzifier: f64,
    pub max_iter: usize,
    pub eps: f64,
    pub init_runs: usize,
    pub top_n: usize,
    pub svd: SvdMethod,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub pretrain_epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub optimizer: Optimizer,

    /// JSON-lines corpus read by `vectorize`.
    pub corpus: Option<PathBuf>,
    /// `en`, `id`, `none` or a path to a stopword file.
    pub stopwords: Option<String>,
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: Option<usize>,
    /// Directory holding the output of `vectorize`.
    pub input_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,

    pub compare: CompareConfig,
}

/// Grid swept by `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub methods: Vec<Method>,
    pub clusters: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            methods: vec![Method::Dfcm, Method::Efcm],
            clusters: vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
            epochs: vec![100],
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let fcm = FcmConfig::default();
        let train = TrainConfig::default();
        RunConfig {
            method: Method::Dfcm,
            code_dim: 5,
            clusters: fcm.clusters,
            fuzzifier: fcm.fuzzifier,
            max_iter: fcm.max_iter,
            eps: fcm.eps,
            init_runs: fcm.init_runs,
            top_n: 10,
            svd: SvdMethod::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            epochs: train.epochs,
            pretrain_epochs: train.pretrain_epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            dropout_rate: train.dropout_rate,
            optimizer: train.optimizer,
            corpus: None,
            stopwords: None,
            embeddings: None,
            embedding_dim: None,
            input_dir: None,
            output_dir: None,
            compare: CompareConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Loads `path` when given, otherwise starts from the defaults.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn pipeline(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            method: self.method,
            code_dim: self.code_dim,
            fcm: FcmConfig {
                clusters: self.clusters,
                fuzzifier: self.fuzzifier,
                max_iter: self.max_iter,
                eps: self.eps,
                seed,
                init_runs: self.init_runs,
            },
            train: TrainConfig {
                epochs: self.epochs,
                pretrain_epochs: self.pretrain_epochs,
                batch_size: self.batch_size,
                learning_rate: self.learning_rate,
                dropout_rate: self.dropout_rate,
                seed,
                optimizer: self.optimizer,
            },
            hidden: self.hidden.clone(),
            top_n: self.top_n,
            seed,
            svd: self.svd,
        }
    }
}

/// Flags overriding the model and clustering fields of [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// dfcm or efcm.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Dimension of the clustering space.
    #[arg(long = "dim")]
    pub code_dim: Option<usize>,
    /// Number of topics.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub fuzzifier: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// k-means restarts for centroid initialization.
    #[arg(long)]
    pub init_runs: Option<usize>,
    #[arg(long)]
    pub top_n: Option<usize>,
    /// auto, dense or randomized.
    #[arg(long, value_parser = parse_svd)]
    pub svd: Option<SvdMethod>,
    /// Encoder hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long = "dropout")]
    pub dropout_rate: Option<f64>,
    /// adaptive_moments or sgd_momentum.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Momentum for sgd_momentum.
    #[arg(long)]
    pub momentum: Option<f64>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: dfcm_core::Error| e.to_string())
}

fn parse_svd(s: &str) -> Result<SvdMethod, String> {
    match s {
        "auto" => Ok(SvdMethod::Auto),
        "dense" => Ok(SvdMethod::Dense),
        "randomized" => Ok(SvdMethod::Randomized),
        other => Err(format!("expected auto, dense or randomized, got {other:?}")),
    }
}

impl ModelFlags {
    pub fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                })*
            };
        }
        set!(method, code_dim, clusters, fuzzifier, max_iter, eps, init_runs, top_n, svd, hidden);
        set!(epochs, batch_size, learning_rate, dropout_rate);
        if self.pretrain_epochs.is_some() {
            cfg.pretrain_epochs = self.pretrain_epochs;
        }
        match (self.optimizer.as_deref(), self.momentum) {
            (None, None) => {}
            (Some("adaptive_moments"), None) => cfg.optimizer = Optimizer::default(),
            (Some("sgd_momentum"), m) => {
                cfg.optimizer = Optimizer::SgdMomentum {
                    momentum: m.unwrap_or(0.9),
                }
            }
            (None, Some(m)) if matches!(cfg.optimizer, Optimizer::SgdMomentum { .. }) => {
                cfg.optimizer = Optimizer::SgdMomentum { momentum: m };
            }
            (None, Some(_)) | (Some("adaptive_moments"), Some(_)) => {
                return Err(CliError::Usage("--momentum requires the sgd_momentum optimizer".into()));
            }
            (Some(other), _) => {
                return Err(CliError::Usage(format!(
                    "optimizer: expected adaptive_moments or sgd_momentum, got {other:?}"
                )));
            }
        }
        Ok(())
    }
}
