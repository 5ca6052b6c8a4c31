use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{count_words, dot, BaselineError};
use crate::embedding::{EmbeddingTable, TableMeta};

/// Symmetric distance-weighted co-occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceCounts {
    words: Vec<String>,
    entries: BTreeMap<(u32, u32), f64>,
}

impl CooccurrenceCounts {
    /// Validate and wrap precomputed counts; both orientations of every
    /// off-diagonal pair must be present with equal values.
    pub fn from_entries(words: Vec<String>, entries: BTreeMap<(u32, u32), f64>) -> Result<Self, BaselineError> {
        for (&(i, j), &x) in &entries {
            let name = |k: u32| words.get(k as usize).cloned().unwrap_or_else(|| format!("#{k}"));
            if !(x > 0.0 && x.is_finite()) || i as usize >= words.len() || j as usize >= words.len() {
                return Err(BaselineError::BadCount(name(i), name(j), x));
            }
            if entries.get(&(j, i)) != Some(&x) {
                return Err(BaselineError::Asymmetric(name(i), name(j)));
            }
        }
        Ok(CooccurrenceCounts { words, entries })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, a: &str, b: &str) -> f64 {
        let find = |w: &str| self.words.iter().position(|x| x == w);
        match (find(a), find(b)) {
            (Some(i), Some(j)) => self.entries.get(&(i as u32, j as u32)).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &x)| (i, j, x))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Weighted mass of unordered co-occurrences (half the symmetric sum).
    pub fn total_weight(&self) -> f64 {
        self.entries.values().sum::<f64>() / 2.0
    }
}

/// Add `1/d` for every token pair at distance `d ≤ window` within a
/// sentence, in both orientations.
pub fn build_cooccurrence(sentences: &[Vec<String>], window: usize) -> Result<CooccurrenceCounts, BaselineError> {
    if window == 0 {
        return Err(BaselineError::InvalidConfig("window must be >= 1".into()));
    }
    let words: Vec<String> = count_words(sentences, 1).into_iter().map(|(w, _)| w).collect();
    let index: HashMap<&str, u32> = words.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
    let mut entries: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for s in sentences {
        let ids: Vec<u32> = s.iter().map(|w| index[w.as_str()]).collect();
        for (i, &a) in ids.iter().enumerate() {
            for (d, &b) in ids[i + 1..].iter().take(window).enumerate() {
                let w = 1.0 / (d + 1) as f64;
                *entries.entry((a, b)).or_default() += w;
                *entries.entry((b, a)).or_default() += w;
            }
        }
    }
    Ok(CooccurrenceCounts { words, entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GloveConfig {
    pub dim: usize,
    pub window: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig {
            dim: 300,
            window: 10,
            x_max: 100.0,
            alpha: 0.75,
            epochs: 25,
            lr: 0.05,
            seed: 0,
        }
    }
}

impl GloveConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |m: &str| Err(BaselineError::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be > 0");
        }
        if self.window == 0 {
            return bad("window must be > 0");
        }
        if !(self.x_max > 0.0) {
            return bad("x_max must be > 0");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if self.epochs == 0 {
            return bad("epochs must be > 0");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        Ok(())
    }
}

/// Weighting function `min(1, (x / x_max)^α)`.
pub fn glove_weight(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x >= x_max {
        1.0
    } else {
        (x / x_max).powf(alpha)
    }
}

#[derive(Debug, Clone)]
pub struct GloveRun {
    pub table: EmbeddingTable,
    /// Weighted squared error summed over all pairs, per epoch, measured
    /// during that epoch's updates.
    pub loss_history: Vec<f64>,
}

/// Weighted least squares on log co-occurrences with per-parameter AdaGrad;
/// returns `w + w̃` per word, L2 normalized.
pub fn train_glove(counts: &CooccurrenceCounts, cfg: &GloveConfig) -> Result<GloveRun, BaselineError> {
    cfg.validate()?;
    if counts.entries.is_empty() {
        return Err(BaselineError::EmptyCounts);
    }
    let n = counts.words.len();
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init = |len: usize| -> Vec<f64> { (0..len).map(|_| (rng.random::<f64>() - 0.5) / dim as f64).collect() };
    let mut w = init(n * dim);
    let mut wt = init(n * dim);
    let mut b = init(n);
    let mut bt = init(n);
    let mut gw = vec![1.0f64; n * dim];
    let mut gwt = vec![1.0f64; n * dim];
    let mut gb = vec![1.0f64; n];
    let mut gbt = vec![1.0f64; n];

    let mut pairs: Vec<(usize, usize, f64)> = counts.entries().map(|(i, j, x)| (i as usize, j as usize, x)).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut grad_i = vec![0.0; dim];
    let mut grad_j = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        pairs.shuffle(&mut rng);
        let mut loss = 0.0;
        for &(i, j, x) in &pairs {
            let (ri, rj) = (i * dim..(i + 1) * dim, j * dim..(j + 1) * dim);
            let diff = dot(&w[ri.clone()], &wt[rj.clone()]) + b[i] + bt[j] - x.ln();
            let f = glove_weight(x, cfg.x_max, cfg.alpha);
            loss += f * diff * diff;
            let fdiff = f * diff;
            for k in 0..dim {
                grad_i[k] = fdiff * wt[j * dim + k];
                grad_j[k] = fdiff * w[i * dim + k];
            }
            for k in 0..dim {
                w[ri.start + k] -= cfg.lr * grad_i[k] / gw[ri.start + k].sqrt();
                wt[rj.start + k] -= cfg.lr * grad_j[k] / gwt[rj.start + k].sqrt();
                gw[ri.start + k] += grad_i[k] * grad_i[k];
                gwt[rj.start + k] += grad_j[k] * grad_j[k];
            }
            b[i] -= cfg.lr * fdiff / gb[i].sqrt();
            bt[j] -= cfg.lr * fdiff / gbt[j].sqrt();
            gb[i] += fdiff * fdiff;
            gbt[j] += fdiff * fdiff;
        }
        loss_history.push(loss);
    }

    let mut table = EmbeddingTable::new(
        dim,
        TableMeta {
            source: "glove".into(),
            corpus: String::new(),
            mode: "glove".into(),
        },
    )?;
    for (i, word) in counts.words.iter().enumerate() {
        let v: Vec<f64> = (0..dim).map(|k| w[i * dim + k] + wt[i * dim + k]).collect();
        table.insert(word, &v)?;
    }
    Ok(GloveRun { table, loss_history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn hand_counted_pairs() {
        let c = build_cooccurrence(&[toks("a b c")], 10).unwrap();
        assert_eq!(c.get("a", "b"), 1.0);
        assert_eq!(c.get("b", "c"), 1.0);
        assert_eq!(c.get("a", "c"), 0.5);
        assert_eq!(c.get("c", "a"), 0.5);
        assert_eq!(c.get("a", "a"), 0.0);
        assert_eq!(c.total_weight(), 2.5);
    }

    #[test]
    fn window_truncates() {
        let c = build_cooccurrence(&[toks("a b c")], 1).unwrap();
        assert_eq!(c.get("a", "c"), 0.0);
        assert!(build_cooccurrence(&[toks("a b")], 0).is_err());
    }

    #[test]
    fn weighting_function() {
        assert_eq!(glove_weight(100.0, 100.0, 0.75), 1.0);
        assert_eq!(glove_weight(500.0, 100.0, 0.75), 1.0);
        assert!((glove_weight(10.0, 100.0, 0.75) - 10f64.powf(0.75) / 100f64.powf(0.75)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_counts() {
        let words = vec!["a".to_string(), "b".to_string()];
        let mut e = BTreeMap::new();
        e.insert((0, 1), 1.0);
        assert!(matches!(CooccurrenceCounts::from_entries(words.clone(), e.clone()), Err(BaselineError::Asymmetric(..))));
        e.insert((1, 0), 1.0);
        assert!(CooccurrenceCounts::from_entries(words.clone(), e.clone()).is_ok());
        e.insert((0, 0), -2.0);
        assert!(matches!(CooccurrenceCounts::from_entries(words, e), Err(BaselineError::BadCount(..))));
    }
}
