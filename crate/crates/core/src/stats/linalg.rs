//! Householder QR least squares.

use super::StatsError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Matrix { rows, cols, data }
    }

    /// Build from columns of equal length.
    pub fn from_columns(columns: &[&[f64]]) -> Self {
        let rows = columns.first().map_or(0, |c| c.len());
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, v) in c.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Xᵀ v`
    pub fn tmul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self.get(i, j) * v[i];
            }
        }
        out
    }
}

/// Least-squares solution with the pieces needed for inference.
#[derive(Debug, Clone)]
pub struct LstsqFit {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `(XᵀX)⁻¹`, row-major `k × k`.
    pub xtx_inv: Vec<f64>,
}

/// Relative pivot size below which a column counts as linearly dependent
/// on the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Solve `min ‖y − Xβ‖` by Householder QR.
pub fn lstsq(x: &Matrix, y: &[f64]) -> Result<LstsqFit, StatsError> {
    let (n, k) = (x.rows, x.cols);
    if y.len() != n {
        return Err(StatsError::LengthMismatch(format!("X has {n} rows, y has {}", y.len())));
    }
    if n < k {
        return Err(StatsError::TooFewObservations { n, needed: k });
    }
    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..k).map(|j| x.column(j)).collect();
    let mut qty = y.to_vec();
    let col_scale: Vec<f64> = a
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut r_diag = vec![0.0; k];

    for j in 0..k {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOL * col_scale[j].max(f64::MIN_POSITIVE) || col_scale[j] == 0.0 {
            return Err(StatsError::RankDeficient { column: j });
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        r_diag[j] = alpha;
        if vnorm2 > 0.0 {
            let reflect = |col: &mut [f64]| {
                let s: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
                for (c, vi) in col.iter_mut().zip(&v) {
                    *c -= s * vi;
                }
            };
            for col in a.iter_mut().skip(j + 1) {
                reflect(&mut col[j..]);
            }
            reflect(&mut qty[j..]);
        }
        a[j][j] = alpha;
        for t in a[j][j + 1..].iter_mut() {
            *t = 0.0;
        }
    }

    // R is upper triangular: R[i][j] = a[j][i] for i <= j
    let r = |i: usize, j: usize| if i == j { r_diag[i] } else { a[j][i] };
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = qty[i];
        for j in i + 1..k {
            s -= r(i, j) * beta[j];
        }
        beta[i] = s / r(i, i);
    }

    // R⁻¹ by back substitution, then (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let mut r_inv = vec![0.0; k * k];
    for c in 0..k {
        for i in (0..=c).rev() {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for j in i + 1..=c {
                s -= r(i, j) * r_inv[j * k + c];
            }
            r_inv[i * k + c] = s / r(i, i);
        }
    }
    let mut xtx_inv = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            xtx_inv[i * k + j] = (i.max(j)..k).map(|m| r_inv[i * k + m] * r_inv[j * k + m]).sum();
        }
    }

    let fitted = x.mul_vec(&beta);
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(LstsqFit {
        beta,
        residuals,
        xtx_inv,
    })
}
