//! Forward computation of the caption and image encoders.

use super::params::*;
use super::EncoderError;
use crate::tensor::{Graph, NodeId, Tensor};

/// Per-token layer-2 states for a padded batch of captions.
#[derive(Debug, Clone)]
pub struct CaptionStates {
    /// One `[batch, 2 * hidden2]` node per time step.
    pub steps: Vec<NodeId>,
    pub lengths: Vec<usize>,
}

impl CaptionStates {
    pub fn batch(&self) -> usize {
        self.lengths.len()
    }

    /// `mask[b * max_len + t]` is true where step `t` of caption `b` is real.
    pub fn mask(&self) -> Vec<bool> {
        let l = self.steps.len();
        let mut m = Vec::with_capacity(self.batch() * l);
        for &len in &self.lengths {
            m.extend((0..l).map(|t| t < len));
        }
        m
    }
}

/// Caption embeddings plus the attention weights that pooled them.
#[derive(Debug, Clone, Copy)]
pub struct EncodedCaptions {
    /// `[batch, 2 * hidden2]`, unit rows.
    pub embeddings: NodeId,
    /// `[batch, max_len]`, rows sum to one; padding entries are zero.
    pub attention: NodeId,
}

fn check_ids(batch: &[Vec<usize>], vocab_len: usize) -> Result<(), EncoderError> {
    if batch.is_empty() {
        return Err(EncoderError::EmptyBatch);
    }
    for ids in batch {
        if ids.len() < 3 {
            return Err(EncoderError::CaptionTooShort(ids.len()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab_len) {
            return Err(EncoderError::UnknownTokenId(bad));
        }
    }
    Ok(())
}

/// One direction of an LSTM layer over time-major inputs `[L * B, input]`.
#[allow(clippy::too_many_arguments)]
fn lstm_direction(
    g: &mut Graph,
    p: &BoundParams,
    base: usize,
    hidden: usize,
    inputs: NodeId,
    lengths: &[usize],
    max_len: usize,
    reverse: bool,
) -> Result<Vec<NodeId>, EncoderError> {
    let b = lengths.len();
    let xw = g.matmul(inputs, p.nodes[base + W_IH])?;
    let xw = g.add_broadcast(xw, p.nodes[base + BIAS])?;
    let mut h: Option<NodeId> = None;
    let mut c: Option<NodeId> = None;
    let mut out = vec![None; max_len];
    let order: Vec<usize> = if reverse {
        (0..max_len).rev().collect()
    } else {
        (0..max_len).collect()
    };
    for t in order {
        let x_t = g.slice(xw, 0, t * b, b)?;
        let gates = match h {
            Some(h) => {
                let hw = g.matmul(h, p.nodes[base + W_HH])?;
                g.add(x_t, hw)?
            }
            None => x_t,
        };
        let i_gate = g.slice(gates, 1, 0, hidden)?;
        let i_gate = g.sigmoid(i_gate)?;
        let f_gate = g.slice(gates, 1, hidden, hidden)?;
        let f_gate = g.sigmoid(f_gate)?;
        let cand = g.slice(gates, 1, 2 * hidden, hidden)?;
        let cand = g.tanh(cand)?;
        let o_gate = g.slice(gates, 1, 3 * hidden, hidden)?;
        let o_gate = g.sigmoid(o_gate)?;

        let ig = g.mul(i_gate, cand)?;
        let c_new = match c {
            Some(c) => {
                let fc = g.mul(f_gate, c)?;
                g.add(fc, ig)?
            }
            None => ig,
        };
        let tc = g.tanh(c_new)?;
        let h_new = g.mul(o_gate, tc)?;

        let valid: Vec<bool> = lengths.iter().map(|&len| t < len).collect();
        if valid.iter().all(|&v| v) {
            h = Some(h_new);
            c = Some(c_new);
        } else {
            // padded rows keep their previous state (zero before the first
            // real token in the reverse direction)
            let mut keep = Vec::with_capacity(b * hidden);
            let mut hold = Vec::with_capacity(b * hidden);
            for &v in &valid {
                keep.extend(std::iter::repeat_n(if v { 1.0 } else { 0.0 }, hidden));
                hold.extend(std::iter::repeat_n(if v { 0.0 } else { 1.0 }, hidden));
            }
            let keep = g.constant(Tensor::new(vec![b, hidden], keep)?);
            let hold = g.constant(Tensor::new(vec![b, hidden], hold)?);
            let blend = |g: &mut Graph, new: NodeId, old: Option<NodeId>| -> Result<NodeId, EncoderError> {
                let kept = g.mul(keep, new)?;
                Ok(match old {
                    Some(o) => {
                        let held = g.mul(hold, o)?;
                        g.add(kept, held)?
                    }
                    None => kept,
                })
            };
            h = Some(blend(g, h_new, h)?);
            c = Some(blend(g, c_new, c)?);
        }
        out[t] = h;
    }
    Ok(out.into_iter().map(|n| n.expect("every step visited")).collect())
}

fn bilstm(
    g: &mut Graph,
    p: &BoundParams,
    fwd: usize,
    bwd: usize,
    hidden: usize,
    inputs: NodeId,
    lengths: &[usize],
    max_len: usize,
) -> Result<Vec<NodeId>, EncoderError> {
    let f = lstm_direction(g, p, fwd, hidden, inputs, lengths, max_len, false)?;
    let r = lstm_direction(g, p, bwd, hidden, inputs, lengths, max_len, true)?;
    f.into_iter()
        .zip(r)
        .map(|(a, b)| Ok(g.concat(&[a, b], 1)?))
        .collect()
}

/// Embedding lookup and both bidirectional LSTM layers. This is the
/// attention-free prefix shared by caption encoding and embedding
/// extraction.
pub fn caption_states(
    g: &mut Graph,
    p: &BoundParams,
    batch: &[Vec<usize>],
    vocab_len: usize,
) -> Result<CaptionStates, EncoderError> {
    check_ids(batch, vocab_len)?;
    let d = p.dims;
    let lengths: Vec<usize> = batch.iter().map(Vec::len).collect();
    let max_len = *lengths.iter().max().expect("non-empty batch");
    let b = batch.len();

    // time-major token ids; padding reuses the end token and is masked
    let pad = batch[0][batch[0].len() - 1];
    let mut ids = Vec::with_capacity(max_len * b);
    for t in 0..max_len {
        for caption in batch {
            ids.push(caption.get(t).copied().unwrap_or(pad));
        }
    }
    let emb = g.gather(p.nodes[EMBEDDING], &ids)?;
    let layer1 = bilstm(g, p, LSTM1_FWD, LSTM1_BWD, d.hidden1, emb, &lengths, max_len)?;
    let stacked = g.concat(&layer1, 0)?;
    let steps = bilstm(g, p, LSTM2_FWD, LSTM2_BWD, d.hidden2, stacked, &lengths, max_len)?;
    Ok(CaptionStates { steps, lengths })
}

/// Self-attention pooling over the layer-2 states, then L2 normalization.
pub fn attend(g: &mut Graph, p: &BoundParams, states: &CaptionStates) -> Result<EncodedCaptions, EncoderError> {
    let b = states.batch();
    let l = states.steps.len();
    let all = g.concat(&states.steps, 0)?;
    let proj = g.matmul(all, p.nodes[ATT_W])?;
    let proj = g.add_broadcast(proj, p.nodes[ATT_B])?;
    let proj = g.tanh(proj)?;
    let scores = g.matmul(proj, p.nodes[ATT_U])?;
    let scores = g.reshape(scores, vec![l, b])?;
    let scores = g.transpose(scores)?;
    let weights = g.softmax_masked(scores, 1, &states.mask())?;
    let mut pooled = None;
    for (t, &h) in states.steps.iter().enumerate() {
        let w = g.slice(weights, 1, t, 1)?;
        let term = g.mul_column(h, w)?;
        pooled = Some(match pooled {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
    }
    let embeddings = g.l2_normalize(pooled.expect("at least one step"))?;
    Ok(EncodedCaptions {
        embeddings,
        attention: weights,
    })
}

/// Encode a batch of wrapped token-id sequences into unit caption vectors.
pub fn encode_captions(
    g: &mut Graph,
    p: &BoundParams,
    batch: &[Vec<usize>],
    vocab_len: usize,
) -> Result<EncodedCaptions, EncoderError> {
    let states = caption_states(g, p, batch, vocab_len)?;
    attend(g, p, &states)
}

/// Linear projection of image features followed by L2 normalization.
pub fn encode_images(g: &mut Graph, p: &BoundParams, features: &[&[f64]]) -> Result<NodeId, EncoderError> {
    let dim = p.dims.feature;
    if features.is_empty() {
        return Err(EncoderError::EmptyBatch);
    }
    let mut data = Vec::with_capacity(features.len() * dim);
    for f in features {
        if f.len() != dim {
            return Err(EncoderError::FeatureLength {
                got: f.len(),
                expected: dim,
            });
        }
        data.extend_from_slice(f);
    }
    let x = g.constant(Tensor::new(vec![features.len(), dim], data)?);
    let y = g.matmul(x, p.nodes[IMG_W])?;
    let y = g.add_broadcast(y, p.nodes[IMG_B])?;
    Ok(g.l2_normalize(y)?)
}

impl GroundedModelParams {
    /// Unit-norm joint-space vector for one image.
    pub fn encode_image(&self, features: &[f64]) -> Result<Vec<f64>, EncoderError> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let y = encode_images(&mut g, &p, &[features])?;
        Ok(g.value(y).data().to_vec())
    }

    /// Unit-norm joint-space vector for one caption given as wrapped ids.
    pub fn encode_caption(&self, ids: &[usize]) -> Result<Vec<f64>, EncoderError> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let enc = encode_captions(&mut g, &p, &[ids.to_vec()], self.vocab.len())?;
        Ok(g.value(enc.embeddings).data().to_vec())
    }

    /// Unit-norm vector for a caption given as plain tokens.
    pub fn encode_tokens(&self, tokens: &[String]) -> Result<Vec<f64>, EncoderError> {
        let ids = self.vocab.encode(tokens)?;
        self.encode_caption(&ids)
    }

    /// Layer-2 states of one caption: one `2 * hidden2` vector per input id,
    /// including the start and end positions.
    pub fn encode_caption_states(&self, ids: &[usize]) -> Result<Vec<Vec<f64>>, EncoderError> {
        let mut out = self.encode_caption_states_batch(&[ids.to_vec()])?;
        Ok(out.pop().expect("one caption"))
    }

    /// Layer-2 states for a batch; `result[b][t]` is the state of token `t`
    /// of caption `b`.
    pub fn encode_caption_states_batch(&self, batch: &[Vec<usize>]) -> Result<Vec<Vec<Vec<f64>>>, EncoderError> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let states = caption_states(&mut g, &p, batch, self.vocab.len())?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(bi, ids)| {
                (0..ids.len())
                    .map(|t| g.value(states.steps[t]).row(bi).to_vec())
                    .collect()
            })
            .collect())
    }
}
