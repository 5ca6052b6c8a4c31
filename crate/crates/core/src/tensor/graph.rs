use std::sync::Arc;

use super::{gemm, gemm_acc, Result, Tensor, TensorError};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddBroadcast { x: NodeId, b: NodeId, row: bool },
    MulColumn { x: NodeId, s: NodeId },
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Softmax { x: NodeId, axis: usize },
    Concat { inputs: Vec<NodeId>, axis: usize },
    Slice { x: NodeId, axis: usize, start: usize },
    L2Normalize { x: NodeId, norms: Vec<f64> },
    Gather { table: NodeId, ids: Arc<Vec<usize>> },
    Sum(NodeId),
    MaskedSum { x: NodeId, mask: Arc<Vec<bool>> },
    Dot(NodeId, NodeId),
    Transpose(NodeId),
    Reshape(NodeId),
    Diag(NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
    is_param: bool,
}

/// Define-by-run computation record.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of a parameter node; panics if `id` is not a parameter of
    /// the graph that produced these gradients.
    pub fn param(&self, id: NodeId) -> &Tensor {
        self.get(id).expect("gradient recorded for parameter node")
    }
}

fn mismatch(op: &'static str, shapes: &[&[usize]]) -> TensorError {
    let s: Vec<String> = shapes.iter().map(|s| format!("{s:?}")).collect();
    TensorError::ShapeMismatch {
        op,
        shapes: s.join(" vs "),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Iterate the index groups that a reduction along `axis` runs over.
fn axis_groups(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    // (number of groups, group length, stride inside a group)
    match (shape, axis) {
        ([n], 0) => (1, *n, 1),
        ([r, c], 1) => (*r, *c, 1),
        ([r, c], 0) => (*c, *r, *c),
        _ => unreachable!("validated by caller"),
    }
}

fn group_start(shape: &[usize], axis: usize, g: usize) -> usize {
    match (shape.len(), axis) {
        (2, 0) => g,
        (_, _) => g * shape[shape.len() - 1],
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// Trainable leaf: backward always reports a gradient for it.
    pub fn param(&mut self, t: Tensor) -> NodeId {
        self.push_raw(Op::Leaf, t, true, true)
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push_raw(Op::Leaf, t, false, false)
    }

    fn push_raw(&mut self, op: Op, value: Tensor, requires_grad: bool, is_param: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
            is_param,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push(
        &mut self,
        name: &'static str,
        op: Op,
        inputs: &[NodeId],
        shape: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<NodeId> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(name));
        }
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        let value = Tensor::new(shape, data)?;
        Ok(self.push_raw(op, value, requires_grad, false))
    }

    fn dims2(&self, id: NodeId, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(id);
        match s {
            [r, c] => Ok((*r, *c)),
            _ => Err(mismatch(op, &[s])),
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(mismatch("matmul", &[self.shape(a), self.shape(b)]));
        }
        let out = gemm(m, k, n, self.value(a).data(), self.value(b).data());
        self.push("matmul", Op::MatMul(a, b), &[a, b], vec![m, n], out)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(op, &[self.shape(a), self.shape(b)]));
        }
        Ok(())
    }

    fn zip(&mut self, name: &'static str, op: Op, a: NodeId, b: NodeId, f: fn(f64, f64) -> f64) -> Result<NodeId> {
        self.same_shape(name, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(name, op, &[a, b], shape, data)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("add", Op::Add(a, b), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("sub", Op::Sub(a, b), a, b, |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("mul", Op::Mul(a, b), a, b, |x, y| x * y)
    }

    /// `x + b` where `b` is a row (`[n]` or `[1, n]`, added to every row of
    /// `x: [m, n]`) or a column (`[m, 1]`, added to every column).
    pub fn add_broadcast(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims2(x, "add_broadcast")?;
        let bs = self.shape(b).to_vec();
        let row = match bs.as_slice() {
            [len] if *len == n => true,
            [1, len] if *len == n => true,
            [len, 1] if *len == m => false,
            _ => return Err(mismatch("add_broadcast", &[self.shape(x), &bs])),
        };
        let xv = self.value(x).data();
        let bv = self.value(b).data();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                out.push(xv[i * n + j] + if row { bv[j] } else { bv[i] });
            }
        }
        self.push("add_broadcast", Op::AddBroadcast { x, b, row }, &[x, b], vec![m, n], out)
    }

    /// Scale each row `i` of `x: [m, n]` by `s[i]`, with `s: [m, 1]`.
    pub fn mul_column(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims2(x, "mul_column")?;
        if self.shape(s) != [m, 1] {
            return Err(mismatch("mul_column", &[self.shape(x), self.shape(s)]));
        }
        let xv = self.value(x).data();
        let sv = self.value(s).data();
        let out = (0..m * n).map(|idx| xv[idx] * sv[idx / n]).collect();
        self.push("mul_column", Op::MulColumn { x, s }, &[x, s], vec![m, n], out)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let data = self.value(x).data().iter().map(|v| v * c).collect();
        let shape = self.shape(x).to_vec();
        self.push("scale", Op::Scale(x, c), &[x], shape, data)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let data = self.value(x).data().iter().map(|v| v + c).collect();
        let shape = self.shape(x).to_vec();
        self.push("add_scalar", Op::AddScalar(x), &[x], shape, data)
    }

    fn map(&mut self, name: &'static str, op: Op, x: NodeId, f: fn(f64) -> f64) -> Result<NodeId> {
        let data = self.value(x).data().iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(name, op, &[x], shape, data)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.map("tanh", Op::Tanh(x), x, f64::tanh)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.map("sigmoid", Op::Sigmoid(x), x, sigmoid)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.map("relu", Op::Relu(x), x, |v| v.max(0.0))
    }

    fn check_axis(&self, op: &'static str, x: NodeId, axis: usize) -> Result<()> {
        let s = self.shape(x);
        if s.len() > 2 || axis >= s.len() {
            return Err(TensorError::InvalidArgument(format!(
                "{op}: axis {axis} invalid for shape {s:?}"
            )));
        }
        Ok(())
    }

    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.softmax_impl(x, axis, None)
    }

    /// Softmax where entries with `mask == false` are excluded and output 0.
    /// The mask has the same layout as `x`.
    pub fn softmax_masked(&mut self, x: NodeId, axis: usize, mask: &[bool]) -> Result<NodeId> {
        if mask.len() != self.value(x).numel() {
            return Err(mismatch("softmax_masked", &[self.shape(x), &[mask.len()]]));
        }
        self.softmax_impl(x, axis, Some(mask))
    }

    fn softmax_impl(&mut self, x: NodeId, axis: usize, mask: Option<&[bool]>) -> Result<NodeId> {
        self.check_axis("softmax", x, axis)?;
        let shape = self.shape(x).to_vec();
        let (groups, len, stride) = axis_groups(&shape, axis);
        let xv = self.value(x).data();
        let mut out = vec![0.0; xv.len()];
        let keep = |i: usize| mask.is_none_or(|m| m[i]);
        for g in 0..groups {
            let base = group_start(&shape, axis, g);
            let idx = |j: usize| base + j * stride;
            let max = (0..len)
                .filter(|&j| keep(idx(j)))
                .map(|j| xv[idx(j)])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(TensorError::InvalidArgument(
                    "softmax group is fully masked".into(),
                ));
            }
            let mut total = 0.0;
            for j in 0..len {
                if keep(idx(j)) {
                    let e = (xv[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    total += e;
                }
            }
            for j in 0..len {
                out[idx(j)] /= total;
            }
        }
        self.push("softmax", Op::Softmax { x, axis }, &[x], shape, out)
    }

    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        let first = *inputs
            .first()
            .ok_or_else(|| TensorError::InvalidArgument("concat of nothing".into()))?;
        self.check_axis("concat", first, axis)?;
        let base = self.shape(first).to_vec();
        for &i in inputs {
            let s = self.shape(i);
            let ok = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !ok {
                return Err(mismatch("concat", &[&base, s]));
            }
        }
        let total: usize = inputs.iter().map(|&i| self.shape(i)[axis]).sum();
        let mut shape = base.clone();
        shape[axis] = total;
        let mut out = Vec::with_capacity(shape.iter().product());
        if base.len() == 1 || axis == 0 {
            for &i in inputs {
                out.extend_from_slice(self.value(i).data());
            }
        } else {
            let rows = base[0];
            for r in 0..rows {
                for &i in inputs {
                    out.extend_from_slice(self.value(i).row(r));
                }
            }
        }
        self.push(
            "concat",
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            inputs,
            shape,
            out,
        )
    }

    /// `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, x: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        self.check_axis("slice", x, axis)?;
        let xs = self.shape(x).to_vec();
        if len == 0 || start + len > xs[axis] {
            return Err(TensorError::InvalidArgument(format!(
                "slice [{start}, {}) out of range for axis {axis} of {xs:?}",
                start + len
            )));
        }
        let xv = self.value(x).data();
        let mut shape = xs.clone();
        shape[axis] = len;
        let out = if xs.len() == 1 {
            xv[start..start + len].to_vec()
        } else if axis == 0 {
            xv[start * xs[1]..(start + len) * xs[1]].to_vec()
        } else {
            let mut o = Vec::with_capacity(xs[0] * len);
            for r in 0..xs[0] {
                o.extend_from_slice(&xv[r * xs[1] + start..r * xs[1] + start + len]);
            }
            o
        };
        self.push("slice", Op::Slice { x, axis, start }, &[x], shape, out)
    }

    /// Normalize a vector, or each row of a matrix, to unit L2 norm.
    pub fn l2_normalize(&mut self, x: NodeId) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        let (rows, cols) = self
            .value(x)
            .dims2()
            .ok_or_else(|| mismatch("l2_normalize", &[&shape]))?;
        let xv = self.value(x).data();
        let mut norms = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(xv.len());
        for r in 0..rows {
            let row = &xv[r * cols..(r + 1) * cols];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(TensorError::ZeroNorm);
            }
            norms.push(norm);
            out.extend(row.iter().map(|v| v / norm));
        }
        self.push("l2_normalize", Op::L2Normalize { x, norms }, &[x], shape, out)
    }

    /// Rows of `table: [V, E]` selected by `ids`, giving `[ids.len(), E]`.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let (v, e) = self.dims2(table, "gather")?;
        if ids.is_empty() {
            return Err(TensorError::InvalidArgument("gather with no ids".into()));
        }
        if let Some(bad) = ids.iter().find(|&&i| i >= v) {
            return Err(TensorError::InvalidArgument(format!(
                "gather id {bad} out of range for {v} rows"
            )));
        }
        let tv = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * e);
        for &i in ids {
            out.extend_from_slice(&tv[i * e..(i + 1) * e]);
        }
        let op = Op::Gather {
            table,
            ids: Arc::new(ids.to_vec()),
        };
        self.push("gather", op, &[table], vec![ids.len(), e], out)
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).data().iter().sum();
        self.push("sum", Op::Sum(x), &[x], vec![1], vec![s])
    }

    /// Sum of the entries whose mask is set.
    pub fn masked_sum(&mut self, x: NodeId, mask: &[bool]) -> Result<NodeId> {
        if mask.len() != self.value(x).numel() {
            return Err(mismatch("masked_sum", &[self.shape(x), &[mask.len()]]));
        }
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v)
            .sum();
        let op = Op::MaskedSum {
            x,
            mask: Arc::new(mask.to_vec()),
        };
        self.push("masked_sum", op, &[x], vec![1], vec![s])
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a).len() != 1 {
            return Err(mismatch("dot", &[self.shape(a), self.shape(b)]));
        }
        self.same_shape("dot", a, b)?;
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .sum();
        self.push("dot", Op::Dot(a, b), &[a, b], vec![1], vec![s])
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        let (r, c) = self.dims2(x, "transpose")?;
        let xv = self.value(x).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = xv[i * c + j];
            }
        }
        self.push("transpose", Op::Transpose(x), &[x], vec![c, r], out)
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let t = self.value(x).reshape(shape)?;
        let requires_grad = self.nodes[x.0].requires_grad;
        Ok(self.push_raw(Op::Reshape(x), t, requires_grad, false))
    }

    /// Diagonal of a square matrix as an `[n, 1]` column.
    pub fn diag(&mut self, x: NodeId) -> Result<NodeId> {
        let (r, c) = self.dims2(x, "diag")?;
        if r != c {
            return Err(mismatch("diag", &[self.shape(x)]));
        }
        let xv = self.value(x).data();
        let out = (0..r).map(|i| xv[i * r + i]).collect();
        self.push("diag", Op::Diag(x), &[x], vec![r, 1], out)
    }

    /// Reverse-mode pass from a scalar `loss`.
    ///
    /// Every parameter node gets a gradient; parameters the loss does not
    /// depend on get zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let ls = self.shape(loss);
        if ls.iter().product::<usize>() != 1 {
            return Err(TensorError::NonScalarLoss(ls.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(n, g)| match g {
                Some(g) if n.requires_grad => {
                    Some(Tensor::new(n.value.shape().to_vec(), g).expect("gradient shape"))
                }
                _ if n.is_param => Some(Tensor::zeros(n.value.shape().to_vec())),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |id: NodeId| self.nodes[id.0].value.data();
        let needs = |id: NodeId| self.nodes[id.0].requires_grad;
        let y = node.value.data();

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.nodes[a.0].value.dims2().unwrap();
                let n = node.value.shape()[1];
                if needs(*a) {
                    // dA = dC · Bᵀ
                    let acc = slot(grads, *a, m * k);
                    gemm_acc(m, n, k, g, (n as isize, 1), val(*b), (1, n as isize), acc);
                }
                if needs(*b) {
                    // dB = Aᵀ · dC
                    let acc = slot(grads, *b, k * n);
                    gemm_acc(k, m, n, val(*a), (1, k as isize), g, (n as isize, 1), acc);
                }
            }
            Op::Add(a, b) => {
                for (id, sign) in [(*a, 1.0), (*b, 1.0)] {
                    if needs(id) {
                        axpy(slot(grads, id, g.len()), sign, g);
                    }
                }
            }
            Op::Sub(a, b) => {
                for (id, sign) in [(*a, 1.0), (*b, -1.0)] {
                    if needs(id) {
                        axpy(slot(grads, id, g.len()), sign, g);
                    }
                }
            }
            Op::Mul(a, b) => {
                for (id, other) in [(*a, *b), (*b, *a)] {
                    if needs(id) {
                        let o = val(other);
                        let acc = slot(grads, id, g.len());
                        for i in 0..g.len() {
                            acc[i] += g[i] * o[i];
                        }
                    }
                }
            }
            Op::AddBroadcast { x, b, row } => {
                let (m, n) = node.value.dims2().unwrap();
                if needs(*x) {
                    axpy(slot(grads, *x, g.len()), 1.0, g);
                }
                if needs(*b) {
                    let acc = slot(grads, *b, if *row { n } else { m });
                    for i in 0..m {
                        for j in 0..n {
                            acc[if *row { j } else { i }] += g[i * n + j];
                        }
                    }
                }
            }
            Op::MulColumn { x, s } => {
                let (m, n) = node.value.dims2().unwrap();
                let (xv, sv) = (val(*x), val(*s));
                if needs(*x) {
                    let acc = slot(grads, *x, m * n);
                    for i in 0..m * n {
                        acc[i] += g[i] * sv[i / n];
                    }
                }
                if needs(*s) {
                    let acc = slot(grads, *s, m);
                    for i in 0..m * n {
                        acc[i / n] += g[i] * xv[i];
                    }
                }
            }
            Op::Scale(x, c) => axpy(slot(grads, *x, g.len()), *c, g),
            Op::AddScalar(x) => axpy(slot(grads, *x, g.len()), 1.0, g),
            Op::Tanh(x) => {
                let acc = slot(grads, *x, g.len());
                for i in 0..g.len() {
                    acc[i] += g[i] * (1.0 - y[i] * y[i]);
                }
            }
            Op::Sigmoid(x) => {
                let acc = slot(grads, *x, g.len());
                for i in 0..g.len() {
                    acc[i] += g[i] * y[i] * (1.0 - y[i]);
                }
            }
            Op::Relu(x) => {
                let xv = val(*x);
                let acc = slot(grads, *x, g.len());
                for i in 0..g.len() {
                    if xv[i] > 0.0 {
                        acc[i] += g[i];
                    }
                }
            }
            Op::Softmax { x, axis } => {
                let shape = node.value.shape();
                let (groups, len, stride) = axis_groups(shape, *axis);
                let acc = slot(grads, *x, g.len());
                for gi in 0..groups {
                    let base = group_start(shape, *axis, gi);
                    let inner: f64 = (0..len)
                        .map(|j| base + j * stride)
                        .map(|i| g[i] * y[i])
                        .sum();
                    for j in 0..len {
                        let i = base + j * stride;
                        acc[i] += y[i] * (g[i] - inner);
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let shape = node.value.shape();
                let mut offset = 0;
                for &inp in inputs {
                    let is = self.nodes[inp.0].value.shape().to_vec();
                    let n_in: usize = is.iter().product();
                    if needs(inp) {
                        let acc = slot(grads, inp, n_in);
                        if shape.len() == 1 || *axis == 0 {
                            axpy(acc, 1.0, &g[offset..offset + n_in]);
                        } else {
                            let (rows, cols, w) = (shape[0], shape[1], is[1]);
                            for r in 0..rows {
                                let src = &g[r * cols + offset..r * cols + offset + w];
                                axpy(&mut acc[r * w..(r + 1) * w], 1.0, src);
                            }
                        }
                    }
                    offset += if shape.len() == 1 || *axis == 0 {
                        n_in
                    } else {
                        is[1]
                    };
                }
            }
            Op::Slice { x, axis, start } => {
                let xs = self.nodes[x.0].value.shape().to_vec();
                let n_x: usize = xs.iter().product();
                let acc = slot(grads, *x, n_x);
                if xs.len() == 1 {
                    axpy(&mut acc[*start..*start + g.len()], 1.0, g);
                } else if *axis == 0 {
                    let off = start * xs[1];
                    axpy(&mut acc[off..off + g.len()], 1.0, g);
                } else {
                    let w = node.value.shape()[1];
                    for r in 0..xs[0] {
                        let dst = r * xs[1] + start;
                        axpy(&mut acc[dst..dst + w], 1.0, &g[r * w..(r + 1) * w]);
                    }
                }
            }
            Op::L2Normalize { x, norms } => {
                let cols = g.len() / norms.len();
                let acc = slot(grads, *x, g.len());
                for (r, norm) in norms.iter().enumerate() {
                    let span = r * cols..(r + 1) * cols;
                    let yr = &y[span.clone()];
                    let gr = &g[span.clone()];
                    let proj: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (j, i) in span.enumerate() {
                        acc[i] += (gr[j] - yr[j] * proj) / norm;
                    }
                }
            }
            Op::Gather { table, ids } => {
                let (v, e) = self.nodes[table.0].value.dims2().unwrap();
                let acc = slot(grads, *table, v * e);
                for (r, &id) in ids.iter().enumerate() {
                    axpy(&mut acc[id * e..(id + 1) * e], 1.0, &g[r * e..(r + 1) * e]);
                }
            }
            Op::Sum(x) => {
                let n = self.nodes[x.0].value.numel();
                for a in slot(grads, *x, n).iter_mut() {
                    *a += g[0];
                }
            }
            Op::MaskedSum { x, mask } => {
                let acc = slot(grads, *x, mask.len());
                for (a, &m) in acc.iter_mut().zip(mask.iter()) {
                    if m {
                        *a += g[0];
                    }
                }
            }
            Op::Dot(a, b) => {
                for (id, other) in [(*a, *b), (*b, *a)] {
                    if needs(id) {
                        axpy(slot(grads, id, val(other).len()), g[0], val(other));
                    }
                }
            }
            Op::Transpose(x) => {
                let (r, c) = self.nodes[x.0].value.dims2().unwrap();
                let acc = slot(grads, *x, r * c);
                for i in 0..r {
                    for j in 0..c {
                        acc[i * c + j] += g[j * r + i];
                    }
                }
            }
            Op::Reshape(x) => axpy(slot(grads, *x, g.len()), 1.0, g),
            Op::Diag(x) => {
                let n = g.len();
                let acc = slot(grads, *x, n * n);
                for i in 0..n {
                    acc[i * n + i] += g[i];
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], id: NodeId, n: usize) -> &mut [f64] {
    grads[id.0].get_or_insert_with(|| vec![0.0; n])
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o += a * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut g = Graph::new();
        let x = rand_tensor(&[3, 4], 1);
        let i = g.constant(Tensor::identity(3));
        let xn = g.constant(x.clone());
        let y = g.matmul(i, xn).unwrap();
        assert_eq!(g.value(y).data(), x.data());
    }

    #[test]
    fn matmul_shape_error_names_op() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(vec![2, 3]));
        let b = g.constant(Tensor::zeros(vec![2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn softmax_uniform() {
        let mut g = Graph::new();
        let x = g.constant(t(&[3], &[0.0, 0.0, 0.0]));
        let y = g.softmax(x, 0).unwrap();
        for v in g.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_masked_zeroes_excluded() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2, 3], &[1.0, 2.0, 3.0, 0.5, 0.5, 9.0]));
        let y = g
            .softmax_masked(x, 1, &[true, true, false, true, true, false])
            .unwrap();
        let v = g.value(y).data();
        assert_eq!(v[2], 0.0);
        assert_eq!(v[5], 0.0);
        assert!((v[3] - 0.5).abs() < 1e-15);
        assert!((v[0] + v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn l2_normalize_345() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[3.0, 4.0]));
        let y = g.l2_normalize(x).unwrap();
        let v = g.value(y).data();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn l2_normalize_zero_errors() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[0.0, 0.0]));
        let err = g.l2_normalize(x).unwrap_err();
        assert_eq!(err.to_string(), "zero-norm input");
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut g = Graph::new();
        let x = g.param(rand_tensor(&[5], 3));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.param(x).data(), &[1.0; 5]);
    }

    #[test]
    fn dot_self_gradient_is_2x() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        let d = g.dot(x, x).unwrap();
        let grads = g.backward(d).unwrap();
        assert_eq!(grads.param(x).data(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn unreachable_param_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        let unused = g.param(t(&[3], &[1.0, 2.0, 3.0]));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.param(unused).data(), &[0.0; 3]);
    }

    #[test]
    fn backward_is_deterministic() {
        let mut g = Graph::new();
        let w = g.param(rand_tensor(&[4, 3], 5));
        let x = g.constant(rand_tensor(&[2, 4], 6));
        let h = g.matmul(x, w).unwrap();
        let a = g.tanh(h).unwrap();
        let s = g.sum(a).unwrap();
        let g1 = g.backward(s).unwrap();
        let g2 = g.backward(s).unwrap();
        let (a1, a2) = (g1.param(w).data(), g2.param(w).data());
        assert!(a1.iter().zip(a2).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    /// Reduce an arbitrary-shaped output to a scalar with fixed random
    /// weights so every output entry contributes a distinct gradient.
    fn weighted_total(g: &mut Graph, y: NodeId, seed: u64) -> Result<NodeId> {
        let w = g.constant(rand_tensor(g.shape(y), seed));
        let p = g.mul(y, w)?;
        g.sum(p)
    }

    fn check(shapes: &[&[usize]], f: impl Fn(&mut Graph, &[NodeId]) -> Result<NodeId>) {
        let params: Vec<Tensor> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| rand_tensor(s, 100 + i as u64))
            .collect();
        let err = grad_check(
            |g, p| {
                let y = f(g, p)?;
                weighted_total(g, y, 7)
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn grad_check_primitives() {
        check(&[&[3, 4], &[4, 2]], |g, p| g.matmul(p[0], p[1]));
        check(&[&[2, 3], &[2, 3]], |g, p| g.add(p[0], p[1]));
        check(&[&[2, 3], &[2, 3]], |g, p| g.sub(p[0], p[1]));
        check(&[&[2, 3], &[2, 3]], |g, p| g.mul(p[0], p[1]));
        check(&[&[2, 3], &[3]], |g, p| g.add_broadcast(p[0], p[1]));
        check(&[&[2, 3], &[2, 1]], |g, p| g.add_broadcast(p[0], p[1]));
        check(&[&[2, 3], &[2, 1]], |g, p| g.mul_column(p[0], p[1]));
        check(&[&[2, 3]], |g, p| g.scale(p[0], -1.7));
        check(&[&[2, 3]], |g, p| g.add_scalar(p[0], 0.3));
        check(&[&[2, 3]], |g, p| g.tanh(p[0]));
        check(&[&[2, 3]], |g, p| g.sigmoid(p[0]));
        check(&[&[2, 3]], |g, p| g.relu(p[0]));
        check(&[&[2, 3]], |g, p| g.softmax(p[0], 1));
        check(&[&[2, 3]], |g, p| g.softmax(p[0], 0));
        check(&[&[4]], |g, p| g.softmax(p[0], 0));
        check(&[&[2, 3]], |g, p| {
            g.softmax_masked(p[0], 1, &[true, false, true, true, true, false])
        });
        check(&[&[2, 3], &[2, 2]], |g, p| g.concat(&[p[0], p[1]], 1));
        check(&[&[2, 3], &[1, 3]], |g, p| g.concat(&[p[0], p[1]], 0));
        check(&[&[3, 4]], |g, p| g.slice(p[0], 1, 1, 2));
        check(&[&[3, 4]], |g, p| g.slice(p[0], 0, 1, 2));
        check(&[&[3, 4]], |g, p| g.l2_normalize(p[0]));
        check(&[&[5]], |g, p| g.l2_normalize(p[0]));
        check(&[&[4, 3]], |g, p| g.gather(p[0], &[2, 0, 2]));
        check(&[&[2, 3]], |g, p| g.sum(p[0]));
        check(&[&[3, 3]], |g, p| {
            g.masked_sum(p[0], &[true, false, true, false, true, false, true, true, false])
        });
        check(&[&[4], &[4]], |g, p| g.dot(p[0], p[1]));
        check(&[&[2, 3]], |g, p| g.transpose(p[0]));
        check(&[&[2, 3]], |g, p| g.reshape(p[0], vec![3, 2]));
        check(&[&[3, 3]], |g, p| g.diag(p[0]));
    }

    #[test]
    fn two_layer_tanh_net_matches_finite_differences() {
        let params = vec![
            rand_tensor(&[4, 6], 11),
            rand_tensor(&[6], 12),
            rand_tensor(&[6, 3], 13),
        ];
        let x = rand_tensor(&[5, 4], 14);
        let err = grad_check(
            |g, p| {
                let xn = g.constant(x.clone());
                let h = g.matmul(xn, p[0])?;
                let h = g.add_broadcast(h, p[1])?;
                let h = g.tanh(h)?;
                let o = g.matmul(h, p[2])?;
                let o = g.tanh(o)?;
                weighted_total(g, o, 15)
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn half_squared_norm_gradient_is_exact() {
        let params = vec![rand_tensor(&[7], 21)];
        let err = grad_check(
            |g, p| {
                let d = g.dot(p[0], p[0])?;
                g.scale(d, 0.5)
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "relative error {err}");
    }
}
