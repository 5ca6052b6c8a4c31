//! Semantic-priming analysis: trial preprocessing, lexical covariates,
//! design matrices with treatment-coded factors, and nested OLS comparisons.

mod design;
mod experiment;
mod lexicon;
mod preprocess;

pub use design::{design_matrix, row_similarities, Design, Formula, Term, BASE_COLUMNS};
pub use experiment::{run_priming_experiment, AicRow, LlrRow, PrimingPlan, PrimingReport, Stack};
pub use lexicon::{edit_distance_is_one, lexical_covariates, Lexicon, LexicalCovariates};
pub use preprocess::{
    attach_covariates, preprocess_spp, MissingPolicy, PreprocessConfig, PreprocessStats, PrimeCondition, PrimingRow,
    PrimingTable, RawPrimingTrial, RtOrder, SdKind, Soa, Task,
};

use crate::stats::StatsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrimingError {
    #[error("cannot standardize: cell soa={soa} task={task} has {n} rows, need at least 3")]
    CannotStandardize { soa: u32, task: &'static str, n: usize },
    #[error("cannot standardize: cell soa={soa} task={task} has zero variance")]
    ZeroVariance { soa: u32, task: &'static str },
    #[error("words missing from lexicon: {}", .0.join(","))]
    MissingFromLexicon(Vec<String>),
    #[error("rows lack lexical covariates; attach them first")]
    MissingCovariates,
    #[error("unknown column {0:?} in formula")]
    UnknownColumn(String),
    #[error("bad formula: {0}")]
    BadFormula(String),
    #[error("similarity column {name:?} has {got} values for {rows} rows")]
    ColumnLength { name: String, got: usize, rows: usize },
    #[error("table {table:?} lacks words: {}", .words.join(","))]
    Uncovered { table: String, words: Vec<String> },
    #[error("unknown table {0:?} in plan")]
    UnknownTable(String),
    #[error("invalid trial: {0}")]
    InvalidTrial(String),
    #[error("invalid lexicon entry: {0}")]
    InvalidLexicon(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
