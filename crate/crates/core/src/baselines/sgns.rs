use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{count_words, dot, sigmoid, BaselineError};
use crate::embedding::{EmbeddingTable, TableMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            window: 10,
            negatives: 10,
            epochs: 5,
            lr: 0.025,
            subsample: 1e-4,
            min_count: 1,
            seed: 0,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |m: &str| Err(BaselineError::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be > 0");
        }
        if self.window == 0 {
            return bad("window must be > 0");
        }
        if self.negatives == 0 {
            return bad("negatives must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be > 0");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.subsample >= 0.0 && self.subsample.is_finite()) {
            return bad("subsample must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastTextConfig {
    pub sgns: SgnsConfig,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
}

impl Default for FastTextConfig {
    fn default() -> Self {
        FastTextConfig {
            sgns: SgnsConfig::default(),
            min_n: 3,
            max_n: 6,
            buckets: 1 << 18,
        }
    }
}

/// Draws word ids with probability proportional to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
    probs: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Result<Self, BaselineError> {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        let dist = WeightedIndex::new(&weights).map_err(|_| BaselineError::EmptyVocabulary)?;
        Ok(NegativeSampler {
            dist,
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }
}

/// Character n-grams of `word` wrapped in `<` and `>`, for every length
/// in `min_n..=max_n`.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let chars: Vec<char> = format!("<{word}>").chars().collect();
    let mut out = Vec::new();
    for n in min_n..=max_n {
        for start in 0..chars.len().saturating_sub(n - 1) {
            out.push(chars[start..start + n].iter().collect());
        }
    }
    out
}

/// FNV-1a hash of an n-gram, reduced to a bucket index.
pub fn ngram_bucket(ngram: &str, buckets: u32) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for b in ngram.bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(16_777_619);
    }
    h % buckets
}

/// Input rows composing each word: its own row, then its n-gram rows.
struct InputLayout {
    rows: Vec<Vec<usize>>,
    n_rows: usize,
}

impl InputLayout {
    fn words_only(n: usize) -> Self {
        InputLayout {
            rows: (0..n).map(|i| vec![i]).collect(),
            n_rows: n,
        }
    }

    /// Hashed n-gram buckets are mapped to compact rows after the word rows,
    /// allocated only for buckets that occur.
    fn with_ngrams(words: &[String], cfg: &FastTextConfig) -> Self {
        let mut bucket_rows: HashMap<u32, usize> = HashMap::new();
        let mut next = words.len();
        let rows = words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let mut r = vec![i];
                for g in char_ngrams(w, cfg.min_n, cfg.max_n) {
                    let b = ngram_bucket(&g, cfg.buckets);
                    let row = *bucket_rows.entry(b).or_insert_with(|| {
                        next += 1;
                        next - 1
                    });
                    r.push(row);
                }
                r
            })
            .collect();
        InputLayout { rows, n_rows: next }
    }
}

fn train_skipgram(
    sentences: &[Vec<String>],
    cfg: &SgnsConfig,
    layout: impl FnOnce(&[String]) -> InputLayout,
    mode: &str,
) -> Result<EmbeddingTable, BaselineError> {
    cfg.validate()?;
    let vocab = count_words(sentences, cfg.min_count);
    if vocab.is_empty() {
        return Err(BaselineError::EmptyVocabulary);
    }
    let words: Vec<String> = vocab.iter().map(|(w, _)| w.clone()).collect();
    let counts: Vec<u64> = vocab.iter().map(|&(_, c)| c).collect();
    let index: HashMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let layout = layout(&words);
    let sampler = NegativeSampler::new(&counts)?;
    let total: u64 = counts.iter().sum();

    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input: Vec<f64> = (0..layout.n_rows * dim).map(|_| (rng.random::<f64>() - 0.5) / dim as f64).collect();
    let mut output = vec![0.0; words.len() * dim];

    let keep_prob: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if cfg.subsample == 0.0 {
                1.0
            } else {
                let t = cfg.subsample * total as f64;
                (((c as f64) / t).sqrt() + 1.0) * t / c as f64
            }
        })
        .collect();

    let budget = (cfg.epochs as u64 * total) as f64;
    let mut processed = 0u64;
    let mut hidden = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        for s in sentences {
            let ids: Vec<usize> = s.iter().filter_map(|w| index.get(w.as_str()).copied()).collect();
            processed += ids.len() as u64;
            let kept: Vec<usize> = ids.into_iter().filter(|&i| keep_prob[i] >= 1.0 || rng.random::<f64>() < keep_prob[i]).collect();
            let lr = cfg.lr * (1.0 - processed as f64 / budget).max(1e-4);
            for (pos, &center) in kept.iter().enumerate() {
                let rows = &layout.rows[center];
                let scale = 1.0 / rows.len() as f64;
                hidden.fill(0.0);
                for &r in rows {
                    for (h, x) in hidden.iter_mut().zip(&input[r * dim..(r + 1) * dim]) {
                        *h += x * scale;
                    }
                }
                let b = rng.random_range(1..=cfg.window);
                let lo = pos.saturating_sub(b);
                let hi = (pos + b).min(kept.len() - 1);
                for (cpos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad.fill(0.0);
                    for n in 0..=cfg.negatives {
                        let (target, label) = if n == 0 {
                            (context, 1.0)
                        } else {
                            let t = sampler.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = &mut output[target * dim..(target + 1) * dim];
                        let g = (label - sigmoid(dot(&hidden, out))) * lr;
                        for ((gr, o), h) in grad.iter_mut().zip(out.iter_mut()).zip(&hidden) {
                            *gr += g * *o;
                            *o += g * h;
                        }
                    }
                    for &r in rows {
                        for (x, gr) in input[r * dim..(r + 1) * dim].iter_mut().zip(&grad) {
                            *x += gr;
                        }
                    }
                    // every row moved by `grad`, so their mean did too
                    for (h, gr) in hidden.iter_mut().zip(&grad) {
                        *h += gr;
                    }
                }
            }
        }
    }

    let mut table = EmbeddingTable::new(
        dim,
        TableMeta {
            source: mode.into(),
            corpus: String::new(),
            mode: mode.into(),
        },
    )?;
    let mut v = vec![0.0; dim];
    for (i, w) in words.iter().enumerate() {
        let rows = &layout.rows[i];
        v.fill(0.0);
        for &r in rows {
            for (a, x) in v.iter_mut().zip(&input[r * dim..(r + 1) * dim]) {
                *a += x / rows.len() as f64;
            }
        }
        table.insert(w, &v)?;
    }
    Ok(table)
}

/// Skip-gram with negative sampling; returns L2-normalized center vectors.
pub fn train_sgns(sentences: &[Vec<String>], cfg: &SgnsConfig) -> Result<EmbeddingTable, BaselineError> {
    train_skipgram(sentences, cfg, |w| InputLayout::words_only(w.len()), "sgns")
}

/// Skip-gram whose input vector for a word is the mean of its own row and
/// its hashed character n-gram rows.
pub fn train_fasttext(sentences: &[Vec<String>], cfg: &FastTextConfig) -> Result<EmbeddingTable, BaselineError> {
    if cfg.min_n == 0 || cfg.min_n > cfg.max_n || cfg.buckets == 0 {
        return Err(BaselineError::InvalidConfig(format!(
            "need 1 <= min_n <= max_n and buckets > 0, got {}..={} and {}",
            cfg.min_n, cfg.max_n, cfg.buckets
        )));
    }
    train_skipgram(sentences, &cfg.sgns, |w| InputLayout::with_ngrams(w, cfg), "fasttext")
}
