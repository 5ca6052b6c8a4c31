use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::preprocess::{PrimingTable, Soa, Task};
use super::PrimingError;
use crate::embedding::EmbeddingTable;
use crate::stats::{lstsq, Matrix, StatsError};

/// Columns every design can draw on without supplying data. Factors use
/// treatment coding with lexical decision and the 200 ms SOA as reference
/// levels.
pub const BASE_COLUMNS: [&str; 7] = [
    "intercept",
    "target_length",
    "is_naming",
    "is_long_soa",
    "log_frequency",
    "contextual_diversity",
    "orth_neighborhood",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Column(String),
    /// Elementwise product of two columns.
    Product(String, String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Column(c) => f.write_str(c),
            Term::Product(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub terms: Vec<Term>,
}

impl Formula {
    /// Intercept, lexical covariates and the two task factors.
    pub fn baseline() -> Self {
        Formula {
            terms: BASE_COLUMNS.iter().map(|c| Term::Column(c.to_string())).collect(),
        }
    }

    /// Add a similarity column with its task and SOA interactions.
    pub fn with_similarity(mut self, name: &str) -> Self {
        self.terms.push(Term::Column(name.to_string()));
        self.terms.push(Term::Product(name.to_string(), "is_naming".into()));
        self.terms.push(Term::Product(name.to_string(), "is_long_soa".into()));
        self
    }

    /// Parse `a + b + a:c`.
    pub fn parse(s: &str) -> Result<Self, PrimingError> {
        let mut terms = Vec::new();
        for part in s.split('+') {
            let part = part.trim();
            let term = match part.split(':').collect::<Vec<_>>().as_slice() {
                [a] if !a.is_empty() => Term::Column(a.to_string()),
                [a, b] if !a.is_empty() && !b.is_empty() => Term::Product(a.to_string(), b.to_string()),
                _ => return Err(PrimingError::BadFormula(format!("bad term {part:?}"))),
            };
            if terms.contains(&term) {
                return Err(PrimingError::BadFormula(format!("duplicate term {part}")));
            }
            terms.push(term);
        }
        Ok(Formula { terms })
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(Term::to_string).collect()
    }

    /// Columns referenced by any term.
    pub fn columns(&self) -> BTreeSet<&str> {
        self.terms
            .iter()
            .flat_map(|t| match t {
                Term::Column(c) => vec![c.as_str()],
                Term::Product(a, b) => vec![a.as_str(), b.as_str()],
            })
            .collect()
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(" + "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub terms: Vec<String>,
}

fn base_value(table: &PrimingTable, row: usize, column: &str) -> Result<Option<f64>, PrimingError> {
    let r = &table.rows[row];
    let cov = || r.covariates.ok_or(PrimingError::MissingCovariates);
    Ok(Some(match column {
        "intercept" => 1.0,
        "is_naming" => f64::from(u8::from(r.task == Task::Naming)),
        "is_long_soa" => f64::from(u8::from(r.soa == Soa::Long)),
        "target_length" => cov()?.length,
        "log_frequency" => cov()?.log_frequency,
        "contextual_diversity" => cov()?.contextual_diversity,
        "orth_neighborhood" => cov()?.orth_neighborhood,
        _ => return Ok(None),
    }))
}

/// Build `X`, `y = z_log_rt` and term names; `similarities` supplies extra
/// columns by name, one value per table row.
pub fn design_matrix(
    table: &PrimingTable,
    similarities: &BTreeMap<String, Vec<f64>>,
    formula: &Formula,
) -> Result<Design, PrimingError> {
    let n = table.len();
    for (name, values) in similarities {
        if values.len() != n {
            return Err(PrimingError::ColumnLength {
                name: name.clone(),
                got: values.len(),
                rows: n,
            });
        }
    }
    for c in formula.columns() {
        if !BASE_COLUMNS.contains(&c) && !similarities.contains_key(c) {
            return Err(PrimingError::UnknownColumn(c.to_string()));
        }
    }
    let value = |row: usize, column: &str| -> Result<f64, PrimingError> {
        match base_value(table, row, column)? {
            Some(v) => Ok(v),
            None => Ok(similarities[column][row]),
        }
    };
    let k = formula.terms.len();
    let mut data = Vec::with_capacity(n * k);
    for row in 0..n {
        for t in &formula.terms {
            data.push(match t {
                Term::Column(c) => value(row, c)?,
                Term::Product(a, b) => value(row, a)? * value(row, b)?,
            });
        }
    }
    let x = Matrix::new(n, k, data);
    let y: Vec<f64> = table.rows.iter().map(|r| r.z_log_rt).collect();
    let terms = formula.names();
    if n >= k {
        if let Err(StatsError::RankDeficient { column }) = lstsq(&x, &y) {
            return Err(StatsError::Collinear(format!(
                "{} is collinear with {}",
                terms[column],
                terms[..column].join(", ")
            ))
            .into());
        }
    }
    Ok(Design { x, y, terms })
}

/// Cosine similarity of prime and target for every row.
pub fn row_similarities(table: &PrimingTable, emb: &EmbeddingTable, name: &str) -> Result<Vec<f64>, PrimingError> {
    let missing: BTreeSet<&str> = table.words().into_iter().filter(|w| !emb.contains(w)).collect();
    if !missing.is_empty() {
        return Err(PrimingError::Uncovered {
            table: name.to_string(),
            words: missing.into_iter().map(String::from).collect(),
        });
    }
    Ok(table
        .rows
        .iter()
        .map(|r| emb.cosine(&r.prime, &r.target).expect("checked coverage"))
        .collect())
}
