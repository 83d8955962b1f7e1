//! Recovers planted topics with both pipelines and prints them.
//!
//! `cargo run -p dfcm-core --example planted -- [seed] [epochs] [pretrain_epochs] [batch_size]`

use std::collections::HashSet;
use std::time::Instant;

use dfcm_core::coherence::evaluate;
use dfcm_core::synthetic::{planted_corpus, planted_embeddings};
use dfcm_core::textprep::vectorize_documents;
use dfcm_core::topics::{detect, Method, PipelineConfig};

fn main() -> dfcm_core::Result<()> {
    let arg = |i: usize, default: usize| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let seed = arg(1, 1) as u64;
    let (epochs, pre, batch) = (arg(2, 20), arg(3, 10), arg(4, 256));
    let planted = planted_corpus(300, 3, 20, 15, seed);
    let (vocab, matrix) = vectorize_documents(&planted.documents, &HashSet::new())?;
    let store = planted_embeddings(&planted.vocabularies);
    for method in [Method::Dfcm, Method::Efcm] {
        let mut cfg = PipelineConfig::new(method, 5, 3, seed);
        cfg.train.epochs = epochs;
        cfg.train.pretrain_epochs = Some(pre);
        cfg.train.batch_size = batch;
        let start = Instant::now();
        let det = detect(&matrix, &vocab, &cfg)?;
        println!(
            "{method}: {:.2?}, fcm iterations {}",
            start.elapsed(),
            det.fcm.iterations
        );
        if let Some(t) = det.finetune_trace.first() {
            println!("  fine-tune loss {t:.3} -> {:.3}", det.finetune_trace.last().unwrap());
        }
        for topic in &det.topic_set.topics {
            println!("  {}: {}", topic.id, topic.terms().join(" "));
        }
        println!("  coherence {:?}", evaluate(&det.topic_set, &store).mean_score);
    }
    Ok(())
}
