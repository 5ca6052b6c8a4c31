//! Word-vector tables shared by every embedding producer.

use std::collections::HashMap;

use crate::corpus::{BOS, EOS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("vector for {word:?} has dimension {got}, expected {expected}")]
    Dimension { word: String, got: usize, expected: usize },
    #[error("vector for {0:?} has zero norm")]
    ZeroNorm(String),
    #[error("vector for {0:?} has non-finite values")]
    NonFinite(String),
    #[error("duplicate word {0:?}")]
    Duplicate(String),
    #[error("special token {0:?} cannot be a table key")]
    SpecialToken(String),
    #[error("embedding dimension must be positive")]
    ZeroDimension,
}

/// Origin of a table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableMeta {
    pub source: String,
    pub corpus: String,
    pub mode: String,
}

/// Unit-norm word vectors of a fixed dimension, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
    pub meta: TableMeta,
}

impl EmbeddingTable {
    pub fn new(dim: usize, meta: TableMeta) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
            meta,
        })
    }

    /// Add a word; the vector is L2 normalized on insertion.
    pub fn insert(&mut self, word: &str, v: &[f64]) -> Result<(), EmbeddingError> {
        if word == BOS || word == EOS {
            return Err(EmbeddingError::SpecialToken(word.to_string()));
        }
        if v.len() != self.dim {
            return Err(EmbeddingError::Dimension {
                word: word.to_string(),
                got: v.len(),
                expected: self.dim,
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite(word.to_string()));
        }
        if self.index.contains_key(word) {
            return Err(EmbeddingError::Duplicate(word.to_string()));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbeddingError::ZeroNorm(word.to_string()));
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.data.extend(v.iter().map(|x| x / norm));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words.iter().map(String::as_str).zip(self.data.chunks_exact(self.dim))
    }

    /// Cosine similarity, which for unit vectors is the dot product.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.get(a)?, self.get(b)?);
        Some(x.iter().zip(y).map(|(p, q)| p * q).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_normalizes_and_validates() {
        let mut t = EmbeddingTable::new(2, TableMeta::default()).unwrap();
        t.insert("a", &[3.0, 4.0]).unwrap();
        assert_eq!(t.get("a").unwrap(), &[0.6, 0.8]);
        assert!(matches!(t.insert("a", &[1.0, 0.0]), Err(EmbeddingError::Duplicate(_))));
        assert!(matches!(t.insert("b", &[0.0, 0.0]), Err(EmbeddingError::ZeroNorm(_))));
        assert!(matches!(t.insert("b", &[1.0]), Err(EmbeddingError::Dimension { .. })));
        assert!(matches!(t.insert(BOS, &[1.0, 0.0]), Err(EmbeddingError::SpecialToken(_))));
        assert!(matches!(t.insert("b", &[f64::NAN, 0.0]), Err(EmbeddingError::NonFinite(_))));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn cosine_of_unit_vectors() {
        let mut t = EmbeddingTable::new(2, TableMeta::default()).unwrap();
        t.insert("a", &[1.0, 0.0]).unwrap();
        t.insert("b", &[2.0, 0.0]).unwrap();
        t.insert("c", &[0.0, 5.0]).unwrap();
        assert_eq!(t.cosine("a", "b"), Some(1.0));
        assert_eq!(t.cosine("a", "c"), Some(0.0));
        assert_eq!(t.cosine("a", "zzz"), None);
    }
}
