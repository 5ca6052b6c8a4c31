use super::StatsError;

/// Benjamini–Hochberg step-up procedure at false discovery rate `q`.
/// Returns one flag per input p-value, in input order.
pub fn bh_correct(pvalues: &[f64], q: f64) -> Result<Vec<bool>, StatsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(StatsError::InvalidArgument(format!("FDR level must be in (0, 1), got {q}")));
    }
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let threshold = (1..=m)
        .rev()
        .find(|&k| pvalues[order[k - 1]] <= k as f64 * q / m as f64)
        .map(|k| pvalues[order[k - 1]]);
    Ok(match threshold {
        Some(t) => pvalues.iter().map(|&p| p <= t).collect(),
        None => vec![false; m],
    })
}
