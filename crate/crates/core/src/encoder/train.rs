use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::batch_hinge_loss;
use super::model::{encode_captions, encode_images};
use super::retrieval::{recall_at_k, RecallScores};
use super::schedule::{cyclic_lr, CyclicSchedule};
use super::{EncoderError, GroundedModelParams, ModelDims};
use crate::corpus::PairedCorpus;
use crate::tensor::{AdamConfig, AdamState, Graph, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dims: ModelDims,
    pub epochs: usize,
    pub batch_size: usize,
    pub margin: f64,
    pub lr_max: f64,
    pub lr_min: f64,
    /// Schedule period in optimizer steps; `None` means four epochs.
    pub cycle_steps: Option<usize>,
    pub recall_k: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dims: ModelDims::default(),
            epochs: 32,
            batch_size: 32,
            margin: 0.2,
            lr_max: 1e-3,
            lr_min: 1e-6,
            cycle_steps: None,
            recall_k: 10,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::InvalidConfig(m));
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.lr_min > 0.0 && self.lr_min < self.lr_max) {
            return bad(format!("need 0 < lr_min < lr_max, got {} and {}", self.lr_min, self.lr_max));
        }
        if !(self.margin > 0.0) {
            return bad(format!("margin must be > 0, got {}", self.margin));
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2".into());
        }
        if self.recall_k < 1 {
            return bad("recall_k must be >= 1".into());
        }
        let d = self.dims;
        if [d.embed, d.hidden1, d.hidden2, d.attention, d.feature].contains(&0) {
            return bad(format!("model dimensions must be positive: {d:?}"));
        }
        Ok(())
    }

    pub fn schedule(&self, steps_per_epoch: usize) -> CyclicSchedule {
        CyclicSchedule {
            lr_min: self.lr_min,
            lr_max: self.lr_max,
            period: self.cycle_steps.unwrap_or(4 * steps_per_epoch).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub recall: Option<RecallScores>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Learning rate used at every optimizer step.
    pub learning_rates: Vec<f64>,
}

/// Split a shuffled order into batches of `size`; a trailing singleton is
/// folded into the previous batch since the loss needs in-batch negatives.
fn batches(order: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

/// Train the caption and image encoders on `corpus`.
///
/// Deterministic for a fixed seed. When `validation` is given, recall@k in
/// both directions is logged after each epoch.
pub fn train(
    corpus: &PairedCorpus,
    validation: Option<&PairedCorpus>,
    cfg: &TrainConfig,
) -> Result<(GroundedModelParams, TrainLog), EncoderError> {
    cfg.validate()?;
    corpus.check_features()?;
    if corpus.features.dim() != cfg.dims.feature {
        return Err(EncoderError::FeatureLength {
            got: corpus.features.dim(),
            expected: cfg.dims.feature,
        });
    }
    if corpus.captions.len() < 2 {
        return Err(EncoderError::BatchTooSmall(corpus.captions.len()));
    }

    let vocab = corpus.vocab();
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = GroundedModelParams::init(cfg.dims, vocab, &mut init_rng);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let encoded: Vec<Vec<usize>> = corpus
        .captions
        .iter()
        .map(|c| params.vocab.encode(&c.tokens))
        .collect::<Result<_, _>>()?;
    let features: Vec<&[f64]> = corpus
        .captions
        .iter()
        .map(|c| corpus.features.get(&c.image_id).expect("checked"))
        .collect();

    let steps_per_epoch = batches(&(0..encoded.len()).collect::<Vec<_>>(), cfg.batch_size).len();
    let schedule = cfg.schedule(steps_per_epoch);
    let mut adam = AdamState::new(params.tensors(), cfg.adam);
    let mut log = TrainLog::default();
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let batch_list = batches(&order, cfg.batch_size);
        for batch in &batch_list {
            let ids: Vec<Vec<usize>> = batch.iter().map(|&i| encoded[i].clone()).collect();
            let feats: Vec<&[f64]> = batch.iter().map(|&i| features[i]).collect();

            let mut g = Graph::new();
            let bound = params.bind(&mut g, true);
            let caps = encode_captions(&mut g, &bound, &ids, params.vocab.len())?;
            let imgs = encode_images(&mut g, &bound, &feats)?;
            let loss = batch_hinge_loss(&mut g, caps.embeddings, imgs, cfg.margin)?;
            total += g.value(loss).item();
            let grads = g.backward(loss)?;
            let grads: Vec<Tensor> = bound.nodes().iter().map(|&n| grads.param(n).clone()).collect();
            drop(g);

            let lr = cyclic_lr(step, &schedule);
            adam.step(params.tensors_mut(), &grads, lr)?;
            log.learning_rates.push(lr);
            step += 1;
        }
        let mean_loss = total / batch_list.len() as f64;
        let recall = match validation {
            Some(v) => {
                let n = v.image_ids().len().min(v.captions.len());
                Some(recall_at_k(&params, v, cfg.recall_k.min(n))?)
            }
            None => None,
        };
        log::info!(
            "epoch {epoch}/{}: loss {mean_loss:.4}{}",
            cfg.epochs,
            recall
                .map(|r| format!(
                    ", R@{} c2i {:.3} i2c {:.3}",
                    r.k, r.caption_to_image, r.image_to_caption
                ))
                .unwrap_or_default()
        );
        log.epochs.push(EpochLog {
            epoch,
            mean_loss,
            recall,
        });
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_tail_is_merged() {
        let b = batches(&[0, 1, 2, 3, 4], 2);
        assert_eq!(b, vec![vec![0, 1], vec![2, 3, 4]]);
        let b = batches(&[0, 1, 2, 3], 3);
        assert_eq!(b, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.lr_min = 1e-2;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            margin: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
