use std::collections::HashMap;

use super::PrimingError;

/// Word frequencies and document counts from a reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, (u64, u64)>,
    /// Words grouped by character length, for neighborhood search.
    by_length: HashMap<usize, Vec<Vec<char>>>,
    pub total_tokens: u64,
    pub total_documents: u64,
}

impl Lexicon {
    /// `total_documents` is the corpus document count; token total is the
    /// sum of frequencies.
    pub fn new(entries: Vec<(String, u64, u64)>, total_documents: u64) -> Result<Self, PrimingError> {
        let mut map = HashMap::with_capacity(entries.len());
        let mut by_length: HashMap<usize, Vec<Vec<char>>> = HashMap::new();
        let mut total_tokens = 0u64;
        for (w, freq, docs) in entries {
            if freq < 1 || docs < 1 {
                return Err(PrimingError::InvalidLexicon(format!("{w}: counts must be >= 1")));
            }
            if docs > total_documents {
                return Err(PrimingError::InvalidLexicon(format!("{w}: document count {docs} exceeds total {total_documents}")));
            }
            let chars: Vec<char> = w.chars().collect();
            if map.insert(w.clone(), (freq, docs)).is_some() {
                return Err(PrimingError::InvalidLexicon(format!("duplicate word {w}")));
            }
            by_length.entry(chars.len()).or_default().push(chars);
            total_tokens += freq;
        }
        Ok(Lexicon {
            entries: map,
            by_length,
            total_tokens,
            total_documents,
        })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<(u64, u64)> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by word.
    pub fn sorted_entries(&self) -> Vec<(&str, u64, u64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(w, &(f, d))| (w.as_str(), f, d)).collect();
        v.sort();
        v
    }

    /// Number of lexicon words exactly one insertion, deletion or
    /// substitution away from `word`.
    pub fn neighborhood(&self, word: &str) -> usize {
        let w: Vec<char> = word.chars().collect();
        let n = w.len();
        [n.wrapping_sub(1), n, n + 1]
            .iter()
            .filter_map(|len| self.by_length.get(len))
            .flatten()
            .filter(|c| edit_distance_is_one(&w, c))
            .count()
    }
}

/// True when `a` and `b` are at Levenshtein distance exactly 1.
pub fn edit_distance_is_one(a: &[char], b: &[char]) -> bool {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    match long.len() - short.len() {
        0 => a.iter().zip(b).filter(|(x, y)| x != y).count() == 1,
        1 => {
            let prefix = short.iter().zip(long).take_while(|(x, y)| x == y).count();
            short[prefix..] == long[prefix + 1..]
        }
        _ => false,
    }
}

/// Per-word lexical predictors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalCovariates {
    /// Character count.
    pub length: f64,
    pub log_frequency: f64,
    /// Number of documents containing the word.
    pub contextual_diversity: f64,
    pub orth_neighborhood: f64,
}

pub fn lexical_covariates(words: &[String], lexicon: &Lexicon) -> Result<Vec<LexicalCovariates>, PrimingError> {
    let missing: Vec<String> = words.iter().filter(|w| !lexicon.contains(w)).cloned().collect();
    if !missing.is_empty() {
        return Err(PrimingError::MissingFromLexicon(missing));
    }
    Ok(words
        .iter()
        .map(|w| {
            let (freq, docs) = lexicon.get(w).expect("checked");
            LexicalCovariates {
                length: w.chars().count() as f64,
                log_frequency: (freq as f64).ln(),
                contextual_diversity: docs as f64,
                orth_neighborhood: lexicon.neighborhood(w) as f64,
            }
        })
        .collect())
}
