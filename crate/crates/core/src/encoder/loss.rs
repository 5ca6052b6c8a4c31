use super::EncoderError;
use crate::tensor::{Graph, NodeId};

/// Bidirectional batch hinge loss on unit caption and image rows.
///
/// With `s = C·Iᵀ`, sums `max(0, margin - s[j][j] + s[j][k])` (caption `j`
/// against image `k`) and `max(0, margin - s[j][j] + s[k][j])` (image `j`
/// against caption `k`) over all `k != j`.
pub fn batch_hinge_loss(
    g: &mut Graph,
    captions: NodeId,
    images: NodeId,
    margin: f64,
) -> Result<NodeId, EncoderError> {
    let b = g.shape(captions)[0];
    if b < 2 {
        return Err(EncoderError::BatchTooSmall(b));
    }
    let it = g.transpose(images)?;
    let sims = g.matmul(captions, it)?;
    let diag = g.diag(sims)?;
    let neg_diag = g.scale(diag, -1.0)?;

    // row j: s[j][k] - s[j][j]
    let c2i = g.add_broadcast(sims, neg_diag)?;
    // column j: s[k][j] - s[j][j]
    let neg_diag_row = g.reshape(neg_diag, vec![1, b])?;
    let i2c = g.add_broadcast(sims, neg_diag_row)?;

    let off_diag: Vec<bool> = (0..b * b).map(|i| i / b != i % b).collect();
    let mut terms = Vec::with_capacity(2);
    for m in [c2i, i2c] {
        let m = g.add_scalar(m, margin)?;
        let m = g.relu(m)?;
        terms.push(g.masked_sum(m, &off_diag)?);
    }
    Ok(g.add(terms[0], terms[1])?)
}

/// The same loss evaluated directly on a similarity matrix.
pub fn hinge_loss_from_similarities(sims: &[Vec<f64>], margin: f64) -> Result<f64, EncoderError> {
    let b = sims.len();
    if b < 2 {
        return Err(EncoderError::BatchTooSmall(b));
    }
    let mut total = 0.0;
    for j in 0..b {
        for k in 0..b {
            if k != j {
                total += (margin - sims[j][j] + sims[j][k]).max(0.0);
                total += (margin - sims[j][j] + sims[k][j]).max(0.0);
            }
        }
    }
    Ok(total)
}
