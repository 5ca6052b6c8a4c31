//! Oracle comparisons that report their worst error, shared by the unit-level
//! integration tests and the acceptance run.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vgembed::corpus::Vocab;
use vgembed::encoder::{batch_hinge_loss, encode_captions, encode_images, GroundedModelParams, ModelDims};
use vgembed::stats::{bh_correct, chi2_sf, ols_fit, partial_correlation, pearson, Matrix};
use vgembed::tensor::{grad_check, Graph, NodeId, Result, Tensor, TensorError};

use super::oracles::{bh_brute_force, chi2_3_sf_quadrature, normal_equations, partial_recursive, pearson_direct};

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Gradient error of one primitive, reduced to a scalar through fixed random
/// weights so every output entry contributes a distinct gradient.
fn primitive_error(shapes: &[&[usize]], f: impl Fn(&mut Graph, &[NodeId]) -> Result<NodeId>) -> f64 {
    let params: Vec<Tensor> = shapes.iter().enumerate().map(|(i, s)| rand_tensor(s, 100 + i as u64)).collect();
    grad_check(
        |g, p| {
            let y = f(g, p)?;
            let w = g.constant(rand_tensor(g.shape(y), 7));
            let prod = g.mul(y, w)?;
            g.sum(prod)
        },
        &params,
        1e-5,
    )
    .unwrap()
}

/// Worst relative gradient error over every graph primitive.
pub fn primitive_grad_error() -> f64 {
    let errors = [
        primitive_error(&[&[3, 4], &[4, 2]], |g, p| g.matmul(p[0], p[1])),
        primitive_error(&[&[2, 3], &[2, 3]], |g, p| g.add(p[0], p[1])),
        primitive_error(&[&[2, 3], &[2, 3]], |g, p| g.sub(p[0], p[1])),
        primitive_error(&[&[2, 3], &[2, 3]], |g, p| g.mul(p[0], p[1])),
        primitive_error(&[&[2, 3], &[3]], |g, p| g.add_broadcast(p[0], p[1])),
        primitive_error(&[&[2, 3], &[2, 1]], |g, p| g.mul_column(p[0], p[1])),
        primitive_error(&[&[2, 3]], |g, p| g.scale(p[0], -1.7)),
        primitive_error(&[&[2, 3]], |g, p| g.add_scalar(p[0], 0.3)),
        primitive_error(&[&[2, 3]], |g, p| g.tanh(p[0])),
        primitive_error(&[&[2, 3]], |g, p| g.sigmoid(p[0])),
        primitive_error(&[&[2, 3]], |g, p| g.relu(p[0])),
        primitive_error(&[&[2, 3]], |g, p| g.softmax(p[0], 1)),
        primitive_error(&[&[2, 3]], |g, p| g.softmax(p[0], 0)),
        primitive_error(&[&[2, 3]], |g, p| g.softmax_masked(p[0], 1, &[true, false, true, true, true, false])),
        primitive_error(&[&[2, 3], &[2, 2]], |g, p| g.concat(&[p[0], p[1]], 1)),
        primitive_error(&[&[3, 4]], |g, p| g.slice(p[0], 1, 1, 2)),
        primitive_error(&[&[3, 4]], |g, p| g.l2_normalize(p[0])),
        primitive_error(&[&[4, 3]], |g, p| g.gather(p[0], &[2, 0, 2])),
        primitive_error(&[&[2, 3]], |g, p| g.sum(p[0])),
        primitive_error(&[&[3, 3]], |g, p| g.masked_sum(p[0], &[true, false, true, false, true, false, true, true, false])),
        primitive_error(&[&[4], &[4]], |g, p| g.dot(p[0], p[1])),
        primitive_error(&[&[2, 3]], |g, p| g.transpose(p[0])),
        primitive_error(&[&[2, 3]], |g, p| g.reshape(p[0], vec![3, 2])),
        primitive_error(&[&[3, 3]], |g, p| g.diag(p[0])),
    ];
    errors.into_iter().fold(0.0, f64::max)
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

pub fn tiny_dims() -> ModelDims {
    ModelDims {
        embed: 4,
        hidden1: 3,
        hidden2: 2,
        attention: 3,
        feature: 8,
    }
}

pub fn tiny_model(dims: ModelDims, seed: u64) -> GroundedModelParams {
    let sents = [toks("a dog runs on the grass"), toks("a cat sleeps")];
    let vocab = Vocab::from_sentences(sents.iter());
    GroundedModelParams::init(dims, vocab, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn tensor_err(e: impl std::fmt::Display) -> TensorError {
    TensorError::InvalidArgument(e.to_string())
}

/// Gradient error of the full hinge loss with respect to the parameter
/// tensors at `trainable`, on a shrunken model.
pub fn grounded_loss_error(trainable: &[usize], captions: &[&str]) -> f64 {
    let p = tiny_model(tiny_dims(), 21);
    let ids: Vec<Vec<usize>> = captions.iter().map(|c| p.vocab.encode(&toks(c)).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let feats: Vec<Vec<f64>> = (0..captions.len()).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    // margin large enough that every hinge term is active
    let margin = 3.0;
    let checked: Vec<Tensor> = trainable.iter().map(|&i| p.tensors()[i].clone()).collect();
    grad_check(
        |g, nodes| {
            let bound = p.bind(g, false);
            let mut all = bound.nodes().to_vec();
            for (slot, &n) in trainable.iter().zip(nodes) {
                all[*slot] = n;
            }
            let bound = bound.with_nodes(&all);
            let caps = encode_captions(g, &bound, &ids, p.vocab.len()).map_err(tensor_err)?;
            let f: Vec<&[f64]> = feats.iter().map(Vec::as_slice).collect();
            let imgs = encode_images(g, &bound, &f).map_err(tensor_err)?;
            batch_hinge_loss(g, caps.embeddings, imgs, margin).map_err(tensor_err)
        },
        &checked,
        1e-5,
    )
    .unwrap()
}

/// Worst gradient error of the full loss over all parameters, on equal and
/// unequal caption lengths.
pub fn full_loss_grad_error() -> f64 {
    let all: Vec<usize> = (0..18).collect();
    let equal = grounded_loss_error(&all, &["a dog runs", "a cat sleeps"]);
    // unequal lengths exercise the padding masks
    let padded = grounded_loss_error(&all, &["a", "the cat sleeps on a grass"]);
    equal.max(padded)
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Matrix, Vec<f64>, Vec<String>) {
    let mut data = normals(rng, n * k);
    for r in 0..n {
        data[r * k] = 1.0;
    }
    let y = normals(rng, n);
    let terms = (0..k).map(|i| format!("x{i}")).collect();
    (Matrix::new(n, k, data), y, terms)
}

/// Worst coefficient error of `ols_fit` against the normal equations,
/// relative to `max(1, |β|)`, over `instances` random problems.
pub fn ols_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let k = rng.random_range(1..=10);
        let n = rng.random_range(k + 5..=200);
        let (x, y, terms) = random_problem(&mut rng, n, k);
        let fit = ols_fit(&x, &y, &terms).unwrap();
        let oracle = normal_equations(&x.data, n, k, &y);
        for (a, b) in fit.beta.iter().zip(&oracle) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    worst
}

pub fn pearson_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let x = normals(&mut rng, 20);
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        worst = worst.max((pearson(&x, &y).unwrap().r - pearson_direct(&x, &y)).abs());
    }
    worst
}

pub fn partial_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = 40;
        let z = normals(&mut rng, n);
        let x: Vec<f64> = z.iter().map(|v| 0.6 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = z.iter().zip(&x).map(|(a, b)| 0.4 * a + 0.3 * b + rng.sample::<f64, _>(StandardNormal)).collect();
        let oracle = partial_recursive(pearson_direct(&x, &y), pearson_direct(&x, &z), pearson_direct(&y, &z));
        worst = worst.max((partial_correlation(&x, &y, &[&z]).unwrap().r - oracle).abs());
    }
    worst
}

/// Worst relative error of the 3-df chi-square survival function against
/// adaptive quadrature.
pub fn chi2_error() -> f64 {
    [0.05, 0.3, 1.0, 2.0, 3.5, 5.0, 7.8, 11.3, 20.0, 35.0, 60.0]
        .iter()
        .map(|&x| {
            let want = chi2_3_sf_quadrature(x);
            (chi2_sf(x, 3).unwrap() - want).abs() / want
        })
        .fold(0.0, f64::max)
}

pub fn random_pvalues(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = rng.random_range(1..=60);
    (0..m)
        .map(|_| {
            let p: f64 = if rng.random_bool(0.3) { rng.random::<f64>() * 0.01 } else { rng.random() };
            // coarse rounding creates ties
            if rng.random_bool(0.3) { (p * 100.0).round() / 100.0 } else { p }
        })
        .collect()
}

/// Number of random p-vectors where BH disagrees with the brute-force
/// step-up definition.
pub fn bh_mismatches(vectors: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..vectors)
        .filter(|_| {
            let p = random_pvalues(&mut rng);
            let q = [0.01, 0.05, 0.1, 0.2][rng.random_range(0..4)];
            bh_correct(&p, q).unwrap() != bh_brute_force(&p, q)
        })
        .count()
}
