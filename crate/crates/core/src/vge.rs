//! Type-level word vectors from the grounded encoder.

use crate::corpus::PairedCorpus;
use crate::embedding::{EmbeddingError, EmbeddingTable, TableMeta};
use crate::encoder::{EncoderError, GroundedModelParams};

#[derive(Debug, thiserror::Error)]
pub enum VgeError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Compensated running sum of vectors.
#[derive(Debug, Clone)]
pub struct KahanVec {
    sum: Vec<f64>,
    carry: Vec<f64>,
}

impl KahanVec {
    pub fn new(dim: usize) -> Self {
        KahanVec {
            sum: vec![0.0; dim],
            carry: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, v: &[f64]) {
        for ((s, c), x) in self.sum.iter_mut().zip(&mut self.carry).zip(v) {
            let y = x - *c;
            let t = *s + y;
            *c = (t - *s) - y;
            *s = t;
        }
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }
}

/// Result of aggregation: the table plus words whose summed state had zero
/// norm and were left out.
#[derive(Debug, Clone)]
pub struct VgeExtraction {
    pub table: EmbeddingTable,
    pub excluded: Vec<String>,
}

const EXTRACT_BATCH: usize = 64;

/// Sum each word's layer-2 states over every occurrence in `corpus`, then
/// L2 normalize. Start and end positions are not aggregated.
pub fn extract_vges(params: &GroundedModelParams, corpus: &PairedCorpus, corpus_id: &str) -> Result<VgeExtraction, VgeError> {
    let vocab = &params.vocab;
    let dim = params.dims.joint();
    let encoded = corpus
        .captions
        .iter()
        .map(|c| vocab.encode(&c.tokens))
        .collect::<Result<Vec<_>, _>>()
        .map_err(EncoderError::from)?;
    let mut acc: Vec<Option<KahanVec>> = vec![None; vocab.len()];
    for chunk in encoded.chunks(EXTRACT_BATCH) {
        let states = params.encode_caption_states_batch(chunk)?;
        for (ids, caption_states) in chunk.iter().zip(states) {
            let inner = 1..ids.len() - 1;
            for (id, state) in ids[inner.clone()].iter().zip(&caption_states[inner]) {
                acc[*id].get_or_insert_with(|| KahanVec::new(dim)).add(state);
            }
        }
    }
    let mut table = EmbeddingTable::new(
        dim,
        TableMeta {
            source: "grounded-encoder".into(),
            corpus: corpus_id.into(),
            mode: "bottleneck-states".into(),
        },
    )?;
    let mut excluded = Vec::new();
    for (id, a) in acc.iter().enumerate() {
        let Some(a) = a else { continue };
        let word = vocab.word(id);
        match table.insert(word, a.sum()) {
            Ok(()) => {}
            Err(EmbeddingError::ZeroNorm(w)) => {
                log::warn!("word {w:?} has a zero-norm state sum; excluded");
                excluded.push(w);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(VgeExtraction { table, excluded })
}

/// Rows of the trained word-embedding layer, L2 normalized, for every
/// non-special vocabulary word.
pub fn extract_input_embeddings(params: &GroundedModelParams, corpus_id: &str) -> Result<EmbeddingTable, VgeError> {
    let emb = params.embedding();
    let mut table = EmbeddingTable::new(
        params.dims.embed,
        TableMeta {
            source: "grounded-encoder".into(),
            corpus: corpus_id.into(),
            mode: "input-embeddings".into(),
        },
    )?;
    for (id, word) in params.vocab.words().iter().enumerate() {
        if !params.vocab.is_special(id) {
            table.insert(word, emb.row(id))?;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanVec::new(1);
        k.add(&[1.0]);
        for _ in 0..1000 {
            k.add(&[1e-16]);
        }
        assert!((k.sum()[0] - (1.0 + 1e-13)).abs() < 1e-16);
    }
}
