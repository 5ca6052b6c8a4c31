use std::f64::consts::PI;

use super::dist::{chi2_sf, t_two_sided_p};
use super::linalg::{lstsq, Matrix};
use super::StatsError;

/// Ordinary least squares fit with Gaussian log-likelihood.
///
/// `k` counts coefficients including the intercept; the error variance is
/// not counted as a parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub terms: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub rss: f64,
    pub residuals: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    /// Bit pattern of `Σy` and `Σy²`, used to check two fits share a response.
    pub response_fingerprint: (u64, u64),
}

impl RegressionResult {
    pub fn coefficient(&self, term: &str) -> Option<(f64, f64)> {
        let i = self.terms.iter().position(|t| t == term)?;
        Some((self.beta[i], self.p[i]))
    }
}

/// Maximized Gaussian log-likelihood for a residual sum of squares.
pub fn gaussian_loglik(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    -n / 2.0 * ((2.0 * PI * rss / n).ln() + 1.0)
}

pub fn aic(k: usize, loglik: f64) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

fn fingerprint(y: &[f64]) -> (u64, u64) {
    let s: f64 = y.iter().sum();
    let ss: f64 = y.iter().map(|v| v * v).sum();
    (s.to_bits(), ss.to_bits())
}

/// Fit `y ~ X` by QR least squares. `terms` names the columns of `X`.
pub fn ols_fit(x: &Matrix, y: &[f64], terms: &[String]) -> Result<RegressionResult, StatsError> {
    let (n, k) = (x.rows, x.cols);
    if terms.len() != k {
        return Err(StatsError::LengthMismatch(format!("{} term names for {k} columns", terms.len())));
    }
    if x.data.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if n <= k {
        return Err(StatsError::TooFewObservations { n, needed: k + 1 });
    }
    let fit = lstsq(x, y).map_err(|e| match e {
        StatsError::RankDeficient { column } => StatsError::Collinear(format!(
            "{} is collinear with {}",
            terms[column],
            terms[..column].join(", ")
        )),
        other => other,
    })?;
    let rss: f64 = fit.residuals.iter().map(|r| r * r).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    if rss < 1e-12 * yy {
        return Err(StatsError::DegenerateFit { rss });
    }
    let df = (n - k) as f64;
    let sigma2 = rss / df;
    let se: Vec<f64> = (0..k).map(|i| (sigma2 * fit.xtx_inv[i * k + i]).sqrt()).collect();
    let t: Vec<f64> = fit.beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p = t.iter().map(|&t| t_two_sided_p(t, df)).collect();
    let loglik = gaussian_loglik(rss, n);
    Ok(RegressionResult {
        terms: terms.to_vec(),
        beta: fit.beta,
        se,
        t,
        p,
        n,
        k,
        rss,
        residuals: fit.residuals,
        loglik,
        aic: aic(k, loglik),
        response_fingerprint: fingerprint(y),
    })
}

/// Likelihood-ratio test of nested OLS models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrTest {
    pub llr: f64,
    pub df: usize,
    pub p: f64,
}

/// Tolerance for rounding noise that can push a nested LLR below zero.
const LLR_SLACK: f64 = 1e-9;

pub fn loglik_ratio_test(full: &RegressionResult, reduced: &RegressionResult) -> Result<LlrTest, StatsError> {
    if full.n != reduced.n || full.response_fingerprint != reduced.response_fingerprint {
        return Err(StatsError::NotNested("models were fit to different responses".into()));
    }
    if let Some(t) = reduced.terms.iter().find(|t| !full.terms.contains(t)) {
        return Err(StatsError::NotNested(format!("term {t} is missing from the full model")));
    }
    if reduced.k > full.k {
        return Err(StatsError::NotNested("reduced model has more coefficients".into()));
    }
    let mut llr = 2.0 * (full.loglik - reduced.loglik);
    if llr < 0.0 {
        if llr < -LLR_SLACK {
            return Err(StatsError::NotNested(format!("negative likelihood ratio {llr}")));
        }
        llr = 0.0;
    }
    let df = full.k - reduced.k;
    let p = if df == 0 { 1.0 } else { chi2_sf(llr, df)? };
    Ok(LlrTest { llr, df, p })
}
