use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::corpus::Vocab;
use crate::tensor::{Graph, NodeId, Tensor};

/// Layer sizes of the caption and image encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub embed: usize,
    /// Units per direction in the first recurrent layer.
    pub hidden1: usize,
    /// Units per direction in the second (bottleneck) recurrent layer.
    pub hidden2: usize,
    pub attention: usize,
    pub feature: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            embed: 300,
            hidden1: 1028,
            hidden2: 300,
            attention: 128,
            feature: 2048,
        }
    }
}

impl ModelDims {
    /// Width of the joint embedding space (both directions of layer 2).
    pub fn joint(&self) -> usize {
        2 * self.hidden2
    }
}

pub(crate) const EMBEDDING: usize = 0;
pub(crate) const LSTM1_FWD: usize = 1;
pub(crate) const LSTM1_BWD: usize = 4;
pub(crate) const LSTM2_FWD: usize = 7;
pub(crate) const LSTM2_BWD: usize = 10;
pub(crate) const ATT_W: usize = 13;
pub(crate) const ATT_B: usize = 14;
pub(crate) const ATT_U: usize = 15;
pub(crate) const IMG_W: usize = 16;
pub(crate) const IMG_B: usize = 17;
pub(crate) const N_TENSORS: usize = 18;

/// Offsets of the three tensors of one LSTM direction.
pub(crate) const W_IH: usize = 0;
pub(crate) const W_HH: usize = 1;
pub(crate) const BIAS: usize = 2;

pub const PARAM_NAMES: [&str; N_TENSORS] = [
    "embedding",
    "lstm1.fwd.w_ih",
    "lstm1.fwd.w_hh",
    "lstm1.fwd.bias",
    "lstm1.bwd.w_ih",
    "lstm1.bwd.w_hh",
    "lstm1.bwd.bias",
    "lstm2.fwd.w_ih",
    "lstm2.fwd.w_hh",
    "lstm2.fwd.bias",
    "lstm2.bwd.w_ih",
    "lstm2.bwd.w_hh",
    "lstm2.bwd.bias",
    "attention.w",
    "attention.b",
    "attention.u",
    "image.w",
    "image.b",
];

/// All trainable parameters of the caption and image encoders.
///
/// LSTM gate blocks are laid out as `[input, forget, candidate, output]`
/// along the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedModelParams {
    pub dims: ModelDims,
    pub vocab: Vocab,
    pub(crate) tensors: Vec<Tensor>,
}

impl GroundedModelParams {
    pub fn expected_shapes(dims: &ModelDims, vocab_len: usize) -> Vec<Vec<usize>> {
        let d = dims;
        let lstm = |input: usize, h: usize| [vec![input, 4 * h], vec![h, 4 * h], vec![4 * h]];
        let mut shapes = vec![vec![vocab_len, d.embed]];
        for _ in 0..2 {
            shapes.extend(lstm(d.embed, d.hidden1));
        }
        for _ in 0..2 {
            shapes.extend(lstm(2 * d.hidden1, d.hidden2));
        }
        shapes.push(vec![d.joint(), d.attention]);
        shapes.push(vec![d.attention]);
        shapes.push(vec![d.attention, 1]);
        shapes.push(vec![d.feature, d.joint()]);
        shapes.push(vec![d.joint()]);
        shapes
    }

    /// Seeded initialization: normal(0, 0.1) word embeddings, uniform(-0.1,
    /// 0.1) everywhere else, forget-gate biases set to 1.
    pub fn init<R: Rng>(dims: ModelDims, vocab: Vocab, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 0.1).expect("valid sd");
        let uniform = Uniform::new(-0.1, 0.1).expect("valid range");
        let shapes = Self::expected_shapes(&dims, vocab.len());
        let tensors = shapes
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                let n: usize = shape.iter().product();
                let mut data: Vec<f64> = if i == EMBEDDING {
                    (0..n).map(|_| normal.sample(rng)).collect()
                } else {
                    (0..n).map(|_| uniform.sample(rng)).collect()
                };
                if PARAM_NAMES[i].ends_with(".bias") && PARAM_NAMES[i].starts_with("lstm") {
                    let h = n / 4;
                    data[h..2 * h].fill(1.0);
                }
                Tensor::new(shape, data).expect("shape from dims")
            })
            .collect();
        GroundedModelParams {
            dims,
            vocab,
            tensors,
        }
    }

    /// Assemble from named tensors, validating every shape.
    pub fn from_tensors(
        dims: ModelDims,
        vocab: Vocab,
        named: Vec<(String, Tensor)>,
    ) -> Result<Self, String> {
        let shapes = Self::expected_shapes(&dims, vocab.len());
        if named.len() != N_TENSORS {
            return Err(format!("expected {N_TENSORS} tensors, got {}", named.len()));
        }
        let mut tensors = Vec::with_capacity(N_TENSORS);
        for (i, (name, t)) in named.into_iter().enumerate() {
            if name != PARAM_NAMES[i] {
                return Err(format!("tensor {i} is {name:?}, expected {:?}", PARAM_NAMES[i]));
            }
            if t.shape() != shapes[i].as_slice() {
                return Err(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    shapes[i]
                ));
            }
            if !t.is_finite() {
                return Err(format!("tensor {name} has non-finite values"));
            }
            tensors.push(t);
        }
        Ok(GroundedModelParams {
            dims,
            vocab,
            tensors,
        })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        PARAM_NAMES.iter().copied().zip(&self.tensors)
    }

    pub fn embedding(&self) -> &Tensor {
        &self.tensors[EMBEDDING]
    }

    /// Register every tensor on `g`, as trainable leaves or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundParams {
        let nodes = self
            .tensors
            .iter()
            .map(|t| {
                if trainable {
                    g.param(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect::<Vec<_>>()
            .try_into()
            .expect("fixed tensor count");
        BoundParams {
            nodes,
            dims: self.dims,
        }
    }
}

/// Graph nodes for a [`GroundedModelParams`], in canonical order.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub(crate) nodes: [NodeId; N_TENSORS],
    pub(crate) dims: ModelDims,
}

impl BoundParams {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Same binding with the node list replaced, e.g. to swap a subset of
    /// constants for trainable leaves.
    pub fn with_nodes(self, nodes: &[NodeId]) -> BoundParams {
        BoundParams {
            nodes: nodes.try_into().expect("one node per parameter tensor"),
            dims: self.dims,
        }
    }
}
