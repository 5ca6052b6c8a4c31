//! Caption corpora, vocabularies and image feature stores.

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("empty caption")]
    EmptyCaption,
    #[error("missing image features for ids: {}", .0.join(","))]
    MissingFeatures(Vec<String>),
    #[error("feature vector for {id} has length {got}, expected {expected}")]
    FeatureDim {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate image id {0}")]
    DuplicateImage(String),
    #[error("non-finite feature value for image {0}")]
    NonFinite(String),
}

/// Word types with corpus counts. The start and end tokens always occupy
/// ids 0 and 1; the remaining words are ordered by descending count, then
/// lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_sentences<'a, I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a S>,
        S: AsRef<[String]> + 'a + ?Sized,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for s in sentences {
            for w in s.as_ref() {
                *counts.entry(w.as_str()).or_default() += 1;
            }
        }
        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(w, _)| *w != BOS && *w != EOS)
            .map(|(w, c)| (w.to_string(), c))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut all = vec![(BOS.to_string(), 0), (EOS.to_string(), 0)];
        all.extend(entries);
        Vocab::from_entries(all)
    }

    /// Build from `(word, count)` pairs in id order; specials must come first.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i))
            .collect();
        let (words, counts) = entries.into_iter().unzip();
        Vocab {
            words,
            counts,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn is_special(&self, id: usize) -> bool {
        matches!(self.words[id].as_str(), BOS | EOS)
    }

    pub fn bos(&self) -> usize {
        self.index[BOS]
    }

    pub fn eos(&self) -> usize {
        self.index[EOS]
    }

    /// Map tokens to ids and wrap with start and end tokens.
    pub fn encode(&self, tokens: &[String]) -> Result<Vec<usize>, CorpusError> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptyCaption);
        }
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(self.bos());
        for t in tokens {
            ids.push(self.id(t).ok_or_else(|| CorpusError::UnknownToken(t.clone()))?);
        }
        ids.push(self.eos());
        Ok(ids)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Caption {
    pub image_id: String,
    pub tokens: Vec<String>,
}

/// Image id to fixed-length feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatureStore {
    dim: usize,
    features: BTreeMap<String, Vec<f64>>,
}

impl ImageFeatureStore {
    pub fn new(dim: usize) -> Self {
        ImageFeatureStore {
            dim,
            features: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, id: String, v: Vec<f64>) -> Result<(), CorpusError> {
        if v.len() != self.dim {
            return Err(CorpusError::FeatureDim {
                id,
                got: v.len(),
                expected: self.dim,
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CorpusError::NonFinite(id));
        }
        if self.features.contains_key(&id) {
            return Err(CorpusError::DuplicateImage(id));
        }
        self.features.insert(id, v);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.features.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.features.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Captions keyed by image id, together with the image features.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedCorpus {
    pub captions: Vec<Caption>,
    pub features: ImageFeatureStore,
}

impl PairedCorpus {
    pub fn new(captions: Vec<Caption>, features: ImageFeatureStore) -> Self {
        PairedCorpus { captions, features }
    }

    pub fn vocab(&self) -> Vocab {
        Vocab::from_sentences(self.captions.iter().map(|c| &c.tokens))
    }

    pub fn sentences(&self) -> Vec<Vec<String>> {
        self.captions.iter().map(|c| c.tokens.clone()).collect()
    }

    pub fn token_count(&self) -> usize {
        self.captions.iter().map(|c| c.tokens.len()).sum()
    }

    /// Error listing every caption image id without features.
    pub fn check_features(&self) -> Result<(), CorpusError> {
        let missing: BTreeSet<&str> = self
            .captions
            .iter()
            .map(|c| c.image_id.as_str())
            .filter(|id| self.features.get(id).is_none())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CorpusError::MissingFeatures(
                missing.into_iter().map(String::from).collect(),
            ))
        }
    }

    /// Image ids referenced by captions, in first-appearance order.
    pub fn image_ids(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.captions
            .iter()
            .filter(|c| seen.insert(c.image_id.as_str()))
            .map(|c| c.image_id.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn vocab_orders_specials_then_counts() {
        let sents = [toks("a dog runs"), toks("a cat")];
        let v = Vocab::from_sentences(sents.iter());
        assert_eq!(v.words(), &["<s>", "</s>", "a", "cat", "dog", "runs"]);
        assert_eq!(v.count(v.id("a").unwrap()), 2);
        assert!(v.is_special(0) && v.is_special(1) && !v.is_special(2));
    }

    #[test]
    fn encode_wraps_and_rejects_unknown() {
        let sents = [toks("a dog")];
        let v = Vocab::from_sentences(sents.iter());
        assert_eq!(v.encode(&toks("dog a")).unwrap(), vec![0, 3, 2, 1]);
        assert!(matches!(v.encode(&toks("cat")), Err(CorpusError::UnknownToken(_))));
        assert!(matches!(v.encode(&[]), Err(CorpusError::EmptyCaption)));
    }

    #[test]
    fn missing_features_lists_ids() {
        let mut store = ImageFeatureStore::new(2);
        store.insert("i1".into(), vec![0.0, 1.0]).unwrap();
        let corpus = PairedCorpus::new(
            vec![
                Caption { image_id: "i1".into(), tokens: toks("a") },
                Caption { image_id: "i9".into(), tokens: toks("b") },
                Caption { image_id: "i7".into(), tokens: toks("b") },
            ],
            store,
        );
        let err = corpus.check_features().unwrap_err().to_string();
        assert!(err.ends_with("i7,i9"), "{err}");
    }

    #[test]
    fn store_rejects_bad_rows() {
        let mut store = ImageFeatureStore::new(2);
        assert!(store.insert("a".into(), vec![1.0]).is_err());
        store.insert("a".into(), vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            store.insert("a".into(), vec![1.0, 2.0]),
            Err(CorpusError::DuplicateImage(_))
        ));
    }
}
