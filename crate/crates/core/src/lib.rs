//! Topic detection by fuzzy c-means clustering in a learned low-dimensional
//! space.
//!
//! The pipeline is: clean and tokenize documents, build a pruned vocabulary
//! and a TF-IDF document-term matrix ([`textprep`]); learn a compact
//! representation with a deep autoencoder ([`autoencoder`]) or a truncated SVD
//! ([`svd`]); cluster the documents with fuzzy c-means ([`fcm`]); map the
//! centroids back to term space and read off topics ([`topics`]); score them
//! against pretrained word embeddings ([`coherence`]).

pub mod autoencoder;
pub mod coherence;
pub mod error;
pub mod fcm;
pub mod seed;
pub mod svd;
pub mod synthetic;
pub mod textprep;
pub mod topics;

pub use error::{Error, ErrorKind, Result};
