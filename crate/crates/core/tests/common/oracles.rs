//! Independent reference implementations used to check the library.

#![allow(dead_code)]

/// OLS by the normal equations, solved with Gauss–Jordan elimination.
/// `x` is row-major `n × k`.
pub fn normal_equations(x: &[f64], n: usize, k: usize, y: &[f64]) -> Vec<f64> {
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = (0..n).map(|r| x[r * k + i] * x[r * k + j]).sum();
        }
        a[i][k] = (0..n).map(|r| x[r * k + i] * y[r]).sum();
    }
    for c in 0..k {
        let pivot = (c..k).max_by(|&p, &q| a[p][c].abs().total_cmp(&a[q][c].abs())).unwrap();
        a.swap(c, pivot);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != c {
                let f = a[r][c];
                let row_c = a[c].clone();
                for (v, w) in a[r].iter_mut().zip(row_c) {
                    *v -= f * w;
                }
            }
        }
    }
    a.iter().map(|row| row[k]).collect()
}

/// Single-pass textbook formula for Pearson's r.
pub fn pearson_direct(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// First-order partial correlation `r_xy·z` from pairwise correlations.
pub fn partial_recursive(rxy: f64, rxz: f64, ryz: f64) -> f64 {
    (rxy - rxz * ryz) / ((1.0 - rxz * rxz) * (1.0 - ryz * ryz)).sqrt()
}

/// χ² density with 3 degrees of freedom: √t·e^{−t/2} / (2^{3/2}·Γ(3/2)),
/// with Γ(3/2) = √π/2.
fn chi2_3_density(t: f64) -> f64 {
    let gamma_3_2 = std::f64::consts::PI.sqrt() / 2.0;
    t.sqrt() * (-t / 2.0).exp() / (2f64.powf(1.5) * gamma_3_2)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Upper tail of χ²(3) by adaptive Simpson quadrature of the density over
/// `[x, x + 400]`; the remaining tail is below 1e-80.
pub fn chi2_3_sf_quadrature(x: f64) -> f64 {
    let f = chi2_3_density;
    let mut total = 0.0;
    // unit panels keep the recursion local
    let mut a = x;
    while a < x + 400.0 {
        let b = a + 1.0;
        let (fa, fm, fb) = (f(a), f((a + b) / 2.0), f(b));
        let whole = simpson(a, b, fa, fm, fb);
        total += adaptive(&f, a, b, fa, fm, fb, whole, 1e-22, 60);
        a = b;
    }
    total
}

/// Benjamini–Hochberg by brute force over the step-up definition: the
/// largest `k` with `p_(k) ≤ k·q/m` is found by counting, for every
/// p-value, how many p-values are at most it.
pub fn bh_brute_force(p: &[f64], q: f64) -> Vec<bool> {
    let m = p.len();
    let mut threshold: Option<f64> = None;
    for &pj in p {
        let rank = p.iter().filter(|&&v| v <= pj).count();
        if pj <= rank as f64 * q / m as f64 && threshold.is_none_or(|t| pj > t) {
            threshold = Some(pj);
        }
    }
    p.iter().map(|&v| threshold.is_some_and(|t| v <= t)).collect()
}
