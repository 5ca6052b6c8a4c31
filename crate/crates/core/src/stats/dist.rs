//! Tail probabilities for the t and χ² distributions.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use super::StatsError;

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // series for P(a, x)
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * log_prefactor.exp()
    } else {
        // continued fraction for Q(a, x), modified Lentz
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        log_prefactor.exp() * h
    }
}

/// Upper-tail probability of a χ² statistic with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64, StatsError> {
    if df < 1 || !(x >= 0.0) || !x.is_finite() {
        return Err(StatsError::InvalidArgument(format!("chi2_sf needs x >= 0 and df >= 1, got x={x}, df={df}")));
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Two-sided p-value of a t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Two-sided p-value of a correlation `r` tested with `df` degrees of
/// freedom; equivalent to the t test with `t = r·√(df / (1 − r²))`.
pub fn correlation_p(r: f64, df: f64) -> f64 {
    beta_reg(df / 2.0, 0.5, (1.0 - r * r).clamp(0.0, 1.0)).clamp(0.0, 1.0)
}
