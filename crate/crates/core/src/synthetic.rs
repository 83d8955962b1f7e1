//! Seeded synthetic data with known structure, for recovery checks and demos.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::coherence::WordVectorStore;
use crate::seed::rng_from_seed;
use crate::textprep::RawDocument;

/// Isotropic Gaussian blobs: `per_center` points around each center, stacked
/// center by center. Returns the points and the generating center index.
pub fn gaussian_blobs(centers: &[[f64; 2]], per_center: usize, sigma: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and nonnegative");
    let n = centers.len() * per_center;
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for k in 0..per_center {
            let row = c * per_center + k;
            points[[row, 0]] = center[0] + noise.sample(&mut rng);
            points[[row, 1]] = center[1] + noise.sample(&mut rng);
            labels.push(c);
        }
    }
    (points, labels)
}

/// A corpus in which every document draws its tokens from exactly one of
/// several disjoint topic vocabularies.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub documents: Vec<RawDocument>,
    /// Generating topic of each document.
    pub labels: Vec<usize>,
    /// Terms of each planted topic.
    pub vocabularies: Vec<Vec<String>>,
}

/// Term `j` of planted topic `t`, e.g. `t1w07`.
pub fn planted_term(topic: usize, index: usize) -> String {
    format!("t{topic}w{index:02}")
}

/// `n_docs` documents assigned round-robin to `n_topics` topics, each made of
/// `tokens_per_doc` tokens sampled uniformly with replacement from its
/// topic's `terms_per_topic` terms.
pub fn planted_corpus(
    n_docs: usize,
    n_topics: usize,
    terms_per_topic: usize,
    tokens_per_doc: usize,
    seed: u64,
) -> PlantedCorpus {
    let mut rng = rng_from_seed(seed);
    let vocabularies: Vec<Vec<String>> = (0..n_topics)
        .map(|t| (0..terms_per_topic).map(|j| planted_term(t, j)).collect())
        .collect();
    let mut documents = Vec::with_capacity(n_docs);
    let mut labels = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let topic = i % n_topics;
        let words: Vec<&str> = (0..tokens_per_doc)
            .map(|_| vocabularies[topic][rng.random_range(0..terms_per_topic)].as_str())
            .collect();
        documents.push(RawDocument {
            id: format!("doc{i:05}"),
            text: words.join(" "),
        });
        labels.push(topic);
    }
    PlantedCorpus {
        documents,
        labels,
        vocabularies,
    }
}

/// Embeddings in which every term of planted topic `t` maps to the basis
/// vector `e_t`: within-topic cosine 1, cross-topic cosine 0.
pub fn planted_embeddings(vocabularies: &[Vec<String>]) -> WordVectorStore {
    let dim = vocabularies.len();
    let mut store = WordVectorStore::new(dim);
    for (t, terms) in vocabularies.iter().enumerate() {
        for term in terms {
            let mut v = vec![0.0; dim];
            v[t] = 1.0;
            store.insert(term.clone(), v).expect("dimension matches");
        }
    }
    store
}

/// Writes embeddings for [`planted_embeddings`] in the text format.
pub fn planted_embeddings_text(vocabularies: &[Vec<String>]) -> String {
    let dim = vocabularies.len();
    let count: usize = vocabularies.iter().map(Vec::len).sum();
    let mut out = format!("{count} {dim}\n");
    for (t, terms) in vocabularies.iter().enumerate() {
        for term in terms {
            out.push_str(term);
            for d in 0..dim {
                out.push_str(if d == t { " 1" } else { " 0" });
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::preprocess;

    #[test]
    fn planted_terms_survive_preprocessing() {
        let corpus = planted_corpus(9, 3, 20, 15, 1);
        for (doc, &label) in corpus.documents.iter().zip(&corpus.labels) {
            let tokens = preprocess(&doc.text);
            assert_eq!(tokens.len(), 15);
            assert!(tokens.iter().all(|t| corpus.vocabularies[label].contains(t)));
        }
    }

    #[test]
    fn embeddings_text_matches_store() {
        let corpus = planted_corpus(3, 3, 4, 2, 0);
        let text = planted_embeddings_text(&corpus.vocabularies);
        let parsed = crate::coherence::parse_word_vectors(text.as_bytes(), None).unwrap();
        assert_eq!(parsed, planted_embeddings(&corpus.vocabularies));
    }
}
