//! Word-similarity evaluation: cosine scores against human ratings, partial
//! correlations against control embeddings, BH correction over the grid.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::embedding::EmbeddingTable;
use crate::stats::{bh_correct, lstsq, partial_correlation, pearson, Matrix, StatsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("dataset {dataset}: no pair has both words in table {table}")]
    NoPairs { dataset: String, table: String },
    #[error("dataset {dataset}: duplicate pair ({w1}, {w2})")]
    DuplicatePair { dataset: String, w1: String, w2: String },
    #[error("dataset {dataset}: non-finite rating for ({w1}, {w2})")]
    NonFiniteRating { dataset: String, w1: String, w2: String },
    #[error("unknown table {0:?} in control plan")]
    UnknownTable(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// What the ratings of a dataset measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Similarity,
    Relatedness,
    Unspecified,
}

impl PairKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairKind::Similarity => "similarity",
            PairKind::Relatedness => "relatedness",
            PairKind::Unspecified => "NA",
        }
    }

    pub fn parse(s: &str) -> Option<PairKind> {
        match s {
            "similarity" => Some(PairKind::Similarity),
            "relatedness" => Some(PairKind::Relatedness),
            "NA" => Some(PairKind::Unspecified),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatedPair {
    pub w1: String,
    pub w2: String,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    pub name: String,
    pub kind: PairKind,
    pairs: Vec<RatedPair>,
}

impl SimilarityDataset {
    pub fn new(name: &str, kind: PairKind, pairs: Vec<RatedPair>) -> Result<Self, SimilarityError> {
        let mut seen = HashSet::new();
        for p in &pairs {
            let err = |dataset: &str| (dataset.to_string(), p.w1.clone(), p.w2.clone());
            if !p.rating.is_finite() {
                let (dataset, w1, w2) = err(name);
                return Err(SimilarityError::NonFiniteRating { dataset, w1, w2 });
            }
            let key = if p.w1 <= p.w2 { (&p.w1, &p.w2) } else { (&p.w2, &p.w1) };
            if !seen.insert(key) {
                let (dataset, w1, w2) = err(name);
                return Err(SimilarityError::DuplicatePair { dataset, w1, w2 });
            }
        }
        Ok(SimilarityDataset {
            name: name.to_string(),
            kind,
            pairs,
        })
    }

    pub fn pairs(&self) -> &[RatedPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Cosine scores for the pairs whose words are both in the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScores {
    /// Indices into the dataset's pairs.
    pub kept: Vec<usize>,
    pub scores: Vec<f64>,
    pub dropped: usize,
}

pub fn pair_similarities(table: &EmbeddingTable, dataset: &SimilarityDataset) -> Result<PairScores, SimilarityError> {
    pairs_in_tables(&[table], dataset, &table.meta.source)
}

/// Pairs covered by every table; scores are from the first table.
fn pairs_in_tables(tables: &[&EmbeddingTable], dataset: &SimilarityDataset, label: &str) -> Result<PairScores, SimilarityError> {
    let mut kept = Vec::new();
    let mut scores = Vec::new();
    for (i, p) in dataset.pairs.iter().enumerate() {
        if tables.iter().all(|t| t.contains(&p.w1) && t.contains(&p.w2)) {
            kept.push(i);
            scores.push(tables[0].cosine(&p.w1, &p.w2).expect("checked membership"));
        }
    }
    if kept.is_empty() {
        return Err(SimilarityError::NoPairs {
            dataset: dataset.name.clone(),
            table: label.to_string(),
        });
    }
    let dropped = dataset.len() - kept.len();
    Ok(PairScores { kept, scores, dropped })
}

/// A named set of control tables; more than one table is controlled for
/// jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    pub name: String,
    pub tables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPlan {
    /// Table whose added explanatory power is tested.
    pub target: String,
    pub controls: Vec<ControlSet>,
    pub fdr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub dataset: String,
    pub model: String,
    pub n_total: usize,
    pub n_available: usize,
    pub r: f64,
    pub r2: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialRow {
    pub dataset: String,
    pub target: String,
    pub control: String,
    pub n: usize,
    pub outcome: Result<PartialStats, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialStats {
    pub partial_r: f64,
    /// Squared partial correlation.
    pub partial_r2: f64,
    /// R² gained by adding the target to a regression of the ratings on the
    /// controls.
    pub incremental_r2: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub models: Vec<ModelRow>,
    pub partials: Vec<PartialRow>,
}

fn r_squared(y: &[f64], columns: &[&[f64]]) -> Result<f64, StatsError> {
    let ones = vec![1.0; y.len()];
    let mut cols: Vec<&[f64]> = vec![&ones];
    cols.extend_from_slice(columns);
    let fit = lstsq(&Matrix::from_columns(&cols), y)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let rss: f64 = fit.residuals.iter().map(|r| r * r).sum();
    Ok(1.0 - rss / tss)
}

fn partial_stats(
    tables: &BTreeMap<String, EmbeddingTable>,
    dataset: &SimilarityDataset,
    target: &str,
    control: &ControlSet,
) -> Result<(usize, PartialStats), SimilarityError> {
    let mut all: Vec<&EmbeddingTable> = vec![&tables[target]];
    all.extend(control.tables.iter().map(|t| &tables[t]));
    let common = pairs_in_tables(&all, dataset, target)?;
    let human: Vec<f64> = common.kept.iter().map(|&i| dataset.pairs[i].rating).collect();
    let control_scores: Vec<Vec<f64>> = all[1..]
        .iter()
        .map(|t| {
            common
                .kept
                .iter()
                .map(|&i| {
                    let p = &dataset.pairs[i];
                    t.cosine(&p.w1, &p.w2).expect("common subset")
                })
                .collect()
        })
        .collect();
    let refs: Vec<&[f64]> = control_scores.iter().map(Vec::as_slice).collect();
    let c = partial_correlation(&common.scores, &human, &refs)?;
    let reduced = r_squared(&human, &refs)?;
    let mut with_target = refs.clone();
    with_target.push(&common.scores);
    let full = r_squared(&human, &with_target)?;
    Ok((
        c.n,
        PartialStats {
            partial_r: c.r,
            partial_r2: c.r * c.r,
            incremental_r2: full - reduced,
            p: c.p,
            significant: false,
        },
    ))
}

/// Plain R² for every (dataset, table) and partial statistics of the plan's
/// target against every control set, with BH flags over all applicable
/// partial tests.
pub fn run_similarity_experiment(
    tables: &BTreeMap<String, EmbeddingTable>,
    datasets: &[SimilarityDataset],
    plan: &ControlPlan,
) -> Result<EvalReport, SimilarityError> {
    for name in std::iter::once(&plan.target).chain(plan.controls.iter().flat_map(|c| &c.tables)) {
        if !tables.contains_key(name) {
            return Err(SimilarityError::UnknownTable(name.clone()));
        }
    }
    let mut models = Vec::new();
    for d in datasets {
        for (name, table) in tables {
            let s = pairs_in_tables(&[table], d, name)?;
            let human: Vec<f64> = s.kept.iter().map(|&i| d.pairs[i].rating).collect();
            let c = pearson(&s.scores, &human)?;
            models.push(ModelRow {
                dataset: d.name.clone(),
                model: name.clone(),
                n_total: d.len(),
                n_available: s.kept.len(),
                r: c.r,
                r2: c.r * c.r,
                p: c.p,
            });
        }
    }

    let mut partials = Vec::new();
    for d in datasets {
        for control in &plan.controls {
            let (n, outcome) = match partial_stats(tables, d, &plan.target, control) {
                Ok((n, s)) => (n, Ok(s)),
                Err(e) => (0, Err(e.to_string())),
            };
            partials.push(PartialRow {
                dataset: d.name.clone(),
                target: plan.target.clone(),
                control: control.name.clone(),
                n,
                outcome,
            });
        }
    }
    let pvalues: Vec<f64> = partials.iter().filter_map(|r| r.outcome.as_ref().ok().map(|s| s.p)).collect();
    let flags = bh_correct(&pvalues, plan.fdr)?;
    let mut flags = flags.into_iter();
    for row in &mut partials {
        if let Ok(s) = &mut row.outcome {
            s.significant = flags.next().expect("one flag per applicable test");
        }
    }
    Ok(EvalReport { models, partials })
}

impl EvalReport {
    pub fn partial(&self, dataset: &str, control: &str) -> Option<&PartialRow> {
        self.partials.iter().find(|r| r.dataset == dataset && r.control == control)
    }

    pub fn model(&self, dataset: &str, model: &str) -> Option<&ModelRow> {
        self.models.iter().find(|r| r.dataset == dataset && r.model == model)
    }

    pub fn models_tsv(&self) -> String {
        let mut out = String::from("dataset\tmodel\tn_total\tn_available\tr\tr2\tp\n");
        for r in &self.models {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6e}", r.dataset, r.model, r.n_total, r.n_available, r.r, r.r2, r.p);
        }
        out
    }

    pub fn partials_tsv(&self) -> String {
        let mut out = String::from("dataset\ttarget\tcontrol\tn\tpartial_r\tpartial_r2\tincremental_r2\tp\tbh_significant\tnote\n");
        for r in &self.partials {
            match &r.outcome {
                Ok(s) => {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6e}\t{}\t",
                        r.dataset, r.target, r.control, r.n, s.partial_r, s.partial_r2, s.incremental_r2, s.p, s.significant
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "{}\t{}\t{}\tNA\tNA\tNA\tNA\tNA\tNA\tnot applicable: {e}", r.dataset, r.target, r.control);
                }
            }
        }
        out
    }

    /// One row per statistic: dataset, model, statistic, value, significance.
    pub fn long_csv(&self) -> String {
        let mut out = String::from("dataset,model,statistic,value,significance\n");
        for r in &self.models {
            let _ = writeln!(out, "{},{},r,{},", r.dataset, r.model, r.r);
            let _ = writeln!(out, "{},{},r2,{},", r.dataset, r.model, r.r2);
        }
        for r in &self.partials {
            if let Ok(s) = &r.outcome {
                let model = format!("{}|{}", r.target, r.control);
                let sig = if s.significant { "significant" } else { "ns" };
                let sign = if s.partial_r >= 0.0 { "positive" } else { "negative" };
                let _ = writeln!(out, "{},{},partial_r,{},{sig}", r.dataset, model, s.partial_r);
                let _ = writeln!(out, "{},{},partial_r2,{},{sig}-{sign}", r.dataset, model, s.partial_r2);
                let _ = writeln!(out, "{},{},incremental_r2,{},{sig}", r.dataset, model, s.incremental_r2);
            }
        }
        out
    }
}
