use super::model::{encode_captions, encode_images};
use super::{EncoderError, GroundedModelParams};
use crate::corpus::PairedCorpus;
use crate::tensor::Graph;

const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallScores {
    pub k: usize,
    pub caption_to_image: f64,
    pub image_to_caption: f64,
}

/// Joint-space embeddings of an evaluation corpus.
#[derive(Debug, Clone)]
pub struct EmbeddedCorpus {
    pub captions: Vec<Vec<f64>>,
    /// Index into `images` of each caption's own image.
    pub caption_image: Vec<usize>,
    pub images: Vec<Vec<f64>>,
    pub image_ids: Vec<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Number of candidates ranked ahead of `target`: higher score, or equal
/// score and lower index.
fn rank_of(scores: &[f64], target: usize) -> usize {
    let s = scores[target];
    scores
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > s || (v == s && j < target))
        .count()
}

/// Recall@k in both directions from precomputed unit embeddings.
pub fn recall_from_embeddings(e: &EmbeddedCorpus, k: usize) -> Result<RecallScores, EncoderError> {
    if e.captions.is_empty() || e.images.is_empty() {
        return Err(EncoderError::EmptyEvalSet);
    }
    if k == 0 || k > e.images.len() || k > e.captions.len() {
        return Err(EncoderError::InvalidConfig(format!(
            "k={k} must be in 1..={}",
            e.images.len().min(e.captions.len())
        )));
    }

    let mut c2i_hits = 0usize;
    for (c, &img) in e.captions.iter().zip(&e.caption_image) {
        let scores: Vec<f64> = e.images.iter().map(|i| dot(c, i)).collect();
        if rank_of(&scores, img) < k {
            c2i_hits += 1;
        }
    }

    let mut i2c_hits = 0usize;
    for (ii, img) in e.images.iter().enumerate() {
        let scores: Vec<f64> = e.captions.iter().map(|c| dot(c, img)).collect();
        let best = e
            .caption_image
            .iter()
            .enumerate()
            .filter(|&(_, &owner)| owner == ii)
            .map(|(ci, _)| rank_of(&scores, ci))
            .min();
        if best.is_some_and(|r| r < k) {
            i2c_hits += 1;
        }
    }

    Ok(RecallScores {
        k,
        caption_to_image: c2i_hits as f64 / e.captions.len() as f64,
        image_to_caption: i2c_hits as f64 / e.images.len() as f64,
    })
}

/// Encode every caption and every referenced image of `corpus`.
pub fn embed_corpus(params: &GroundedModelParams, corpus: &PairedCorpus) -> Result<EmbeddedCorpus, EncoderError> {
    corpus.check_features()?;
    let image_ids = corpus.image_ids();
    let image_index: std::collections::HashMap<&str, usize> =
        image_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let ids: Vec<Vec<usize>> = corpus
        .captions
        .iter()
        .map(|c| params.vocab.encode(&c.tokens))
        .collect::<Result<_, _>>()?;
    let caption_image = corpus
        .captions
        .iter()
        .map(|c| image_index[c.image_id.as_str()])
        .collect();

    let mut captions = Vec::with_capacity(ids.len());
    for chunk in ids.chunks(EVAL_BATCH) {
        let mut g = Graph::new();
        let p = params.bind(&mut g, false);
        let enc = encode_captions(&mut g, &p, chunk, params.vocab.len())?;
        let v = g.value(enc.embeddings);
        captions.extend((0..chunk.len()).map(|r| v.row(r).to_vec()));
    }

    let mut images = Vec::with_capacity(image_ids.len());
    for chunk in image_ids.chunks(EVAL_BATCH) {
        let feats: Vec<&[f64]> = chunk
            .iter()
            .map(|id| corpus.features.get(id).expect("checked above"))
            .collect();
        let mut g = Graph::new();
        let p = params.bind(&mut g, false);
        let y = encode_images(&mut g, &p, &feats)?;
        let v = g.value(y);
        images.extend((0..chunk.len()).map(|r| v.row(r).to_vec()));
    }

    Ok(EmbeddedCorpus {
        captions,
        caption_image,
        images,
        image_ids,
    })
}

/// Caption-to-image and image-to-caption recall@k on `corpus`.
pub fn recall_at_k(params: &GroundedModelParams, corpus: &PairedCorpus, k: usize) -> Result<RecallScores, EncoderError> {
    if corpus.captions.is_empty() {
        return Err(EncoderError::EmptyEvalSet);
    }
    recall_from_embeddings(&embed_corpus(params, corpus)?, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(i: usize, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn identical_modalities_give_perfect_recall() {
        let n = 6;
        let e = EmbeddedCorpus {
            captions: (0..n).map(|i| one_hot(i, n)).collect(),
            caption_image: (0..n).collect(),
            images: (0..n).map(|i| one_hot(i, n)).collect(),
            image_ids: (0..n).map(|i| i.to_string()).collect(),
        };
        let r = recall_from_embeddings(&e, 1).unwrap();
        assert_eq!((r.caption_to_image, r.image_to_caption), (1.0, 1.0));
    }

    #[test]
    fn ties_break_toward_lower_index() {
        // every score ties; only candidate 0 is ranked first
        let e = EmbeddedCorpus {
            captions: vec![vec![1.0, 0.0]; 3],
            caption_image: vec![0, 1, 2],
            images: vec![vec![0.0, 1.0]; 3],
            image_ids: vec!["a".into(), "b".into(), "c".into()],
        };
        let r = recall_from_embeddings(&e, 1).unwrap();
        assert!((r.caption_to_image - 1.0 / 3.0).abs() < 1e-15);
        let r2 = recall_from_embeddings(&e, 2).unwrap();
        assert!((r2.caption_to_image - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_oversized_k() {
        let e = EmbeddedCorpus {
            captions: vec![],
            caption_image: vec![],
            images: vec![],
            image_ids: vec![],
        };
        assert!(matches!(recall_from_embeddings(&e, 1), Err(EncoderError::EmptyEvalSet)));
        let e = EmbeddedCorpus {
            captions: vec![vec![1.0]],
            caption_image: vec![0],
            images: vec![vec![1.0]],
            image_ids: vec!["a".into()],
        };
        assert!(recall_from_embeddings(&e, 2).is_err());
    }
}
