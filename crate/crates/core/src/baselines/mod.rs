//! Text-only embedding trainers: skip-gram with negative sampling, its
//! subword variant, and GloVe.

mod glove;
mod sgns;

pub use glove::{build_cooccurrence, glove_weight, train_glove, CooccurrenceCounts, GloveConfig, GloveRun};
pub use sgns::{char_ngrams, ngram_bucket, train_fasttext, train_sgns, FastTextConfig, NegativeSampler, SgnsConfig};

use crate::embedding::EmbeddingError;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("empty vocabulary (no word reaches the minimum count)")]
    EmptyVocabulary,
    #[error("empty co-occurrence counts")]
    EmptyCounts,
    #[error("invalid co-occurrence entry ({0}, {1}) = {2}: counts must be positive and finite")]
    BadCount(String, String, f64),
    #[error("co-occurrence counts are not symmetric at ({0}, {1})")]
    Asymmetric(String, String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Word types with at least `min_count` occurrences, ordered by descending
/// count then alphabetically, with their counts.
pub(crate) fn count_words(sentences: &[Vec<String>], min_count: u64) -> Vec<(String, u64)> {
    let mut counts: std::collections::HashMap<&str, u64> = std::collections::HashMap::new();
    for s in sentences {
        for w in s {
            *counts.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
