use super::{Graph, NodeId, Result, Tensor, TensorError};

/// Compare reverse-mode gradients of `f` against central finite differences.
///
/// `f` builds a scalar loss from parameter nodes created in order from
/// `params`. Returns the maximum over all components of
/// `|analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(eps > 0.0) {
        return Err(TensorError::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    let eval = |ps: &[Tensor]| -> Result<(Graph, Vec<NodeId>, NodeId)> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = ps.iter().map(|p| g.param(p.clone())).collect();
        let loss = f(&mut g, &ids)?;
        let v = g.value(loss);
        if v.numel() != 1 {
            return Err(TensorError::NonScalarLoss(v.shape().to_vec()));
        }
        if !v.item().is_finite() {
            return Err(TensorError::NonFinite("grad_check loss"));
        }
        Ok((g, ids, loss))
    };

    let (g, ids, loss) = eval(params)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| grads.param(id).clone()).collect();

    let mut worst: f64 = 0.0;
    let mut work = params.to_vec();
    for (pi, param) in params.iter().enumerate() {
        for ci in 0..param.numel() {
            let orig = param.data()[ci];
            work[pi].data_mut()[ci] = orig + eps;
            let (g_plus, _, l_plus) = eval(&work)?;
            work[pi].data_mut()[ci] = orig - eps;
            let (g_minus, _, l_minus) = eval(&work)?;
            work[pi].data_mut()[ci] = orig;
            let numeric = (g_plus.value(l_plus).item() - g_minus.value(l_minus).item()) / (2.0 * eps);
            if !numeric.is_finite() {
                return Err(TensorError::NonFinite("grad_check numeric gradient"));
            }
            let a = analytic[pi].data()[ci];
            worst = worst.max((a - numeric).abs() / numeric.abs().max(1.0));
        }
    }
    Ok(worst)
}
