use super::dist::correlation_p;
use super::linalg::{lstsq, Matrix};
use super::StatsError;

/// A correlation coefficient with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
    /// Degrees of freedom of the t test.
    pub df: usize,
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(format!("{} vs {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn product_moment(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let (cx, cy) = (centered(x), centered(y));
    let sxx: f64 = cx.iter().map(|v| v * v).sum();
    let syy: f64 = cy.iter().map(|v| v * v).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    let sxy: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation with a two-sided t-test p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    check_lengths(x, y)?;
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations { n, needed: 3 });
    }
    let r = product_moment(x, y)?;
    let df = n - 2;
    Ok(Correlation {
        r,
        p: correlation_p(r, df as f64),
        n,
        df,
    })
}

/// Residuals of `y` regressed on an intercept plus `controls`.
fn residualize(y: &[f64], design: &Matrix) -> Result<Vec<f64>, StatsError> {
    let resid = lstsq(design, y)?.residuals;
    let scale: f64 = centered(y).iter().map(|v| v * v).sum::<f64>().sqrt();
    let size: f64 = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    // exact dependence leaves only rounding noise
    if size <= 1e-10 * scale {
        return Err(StatsError::ConstantInput);
    }
    Ok(resid)
}

/// Correlation between `target` and `human` after regressing both on
/// `controls` plus an intercept. With no controls this is [`pearson`].
pub fn partial_correlation(
    target: &[f64],
    human: &[f64],
    controls: &[&[f64]],
) -> Result<Correlation, StatsError> {
    if controls.is_empty() {
        return pearson(target, human);
    }
    check_lengths(target, human)?;
    for c in controls {
        check_lengths(target, c)?;
    }
    let n = target.len();
    let g = controls.len();
    if n < g + 4 {
        return Err(StatsError::TooFewObservations { n, needed: g + 4 });
    }
    let ones = vec![1.0; n];
    let mut columns: Vec<&[f64]> = vec![&ones];
    columns.extend_from_slice(controls);
    let design = Matrix::from_columns(&columns);
    let rt = residualize(target, &design).map_err(|e| match e {
        StatsError::RankDeficient { column } => {
            StatsError::Collinear(format!("control {} is collinear with earlier controls or the intercept", column - 1))
        }
        other => other,
    })?;
    let rh = residualize(human, &design)?;
    let r = product_moment(&rt, &rh)?;
    let df = n - 2 - g;
    Ok(Correlation {
        r,
        p: correlation_p(r, df as f64),
        n,
        df,
    })
}
