//! Correlation, multiple-comparison and regression statistics.

mod correlation;
mod dist;
mod fdr;
mod linalg;
mod ols;

pub use correlation::{partial_correlation, pearson, Correlation};
pub use dist::{chi2_sf, correlation_p, gamma_q, t_two_sided_p};
pub use fdr::bh_correct;
pub use linalg::{lstsq, LstsqFit, Matrix};
pub use ols::{loglik_ratio_test, ols_fit, LlrTest, RegressionResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("too few observations: n={n}, need at least {needed}")]
    TooFewObservations { n: usize, needed: usize },
    #[error("constant input")]
    ConstantInput,
    #[error("rank-deficient design: column {column} is collinear with earlier columns")]
    RankDeficient { column: usize },
    #[error("collinear terms: {0}")]
    Collinear(String),
    #[error("degenerate fit: residual sum of squares {rss:e} is numerically zero")]
    DegenerateFit { rss: f64 },
    #[error("models are not nested: {0}")]
    NotNested(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite input")]
    NonFinite,
}
