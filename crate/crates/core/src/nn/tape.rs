//! Reverse-mode autodiff over [`Matrix`] values.
//!
//! Forward values are computed eagerly as ops are pushed; `backward` walks
//! the tape in reverse and accumulates gradients for every parameter leaf.
//! All accumulation happens in fixed (node, then element) order, so gradients
//! are bit-reproducible.

use super::matrix::Matrix;
use super::params::{ParamId, ParamSet};
use std::collections::HashMap;

pub type NodeId = usize;

enum Op {
    Const,
    Param(ParamId),
    MatMulNN(NodeId, NodeId),
    MatMulNT(NodeId, NodeId),
    MatMulTN(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    Scale(NodeId, f64),
    AddRowBroadcast(NodeId, NodeId),
    Gelu(NodeId),
    Tanh(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    SoftmaxRows(NodeId),
    ConcatRows(Vec<NodeId>),
    SliceRows {
        x: NodeId,
        start: usize,
    },
    ConcatCols(Vec<NodeId>),
    SliceCols {
        x: NodeId,
        start: usize,
    },
    GatherRows {
        table: NodeId,
        ids: Vec<usize>,
    },
    ShiftRows {
        x: NodeId,
        offset: i64,
    },
    /// Mean of -log softmax(logits_r)[target_r] over rows with a target.
    CrossEntropyRows {
        logits: NodeId,
        targets: Vec<Option<usize>>,
        softmax: Matrix,
        count: usize,
    },
    /// Mean squared error over the masked rows (all columns).
    MseRows {
        pred: NodeId,
        target: Matrix,
        row_mask: Vec<bool>,
        count: usize,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

pub struct Grads {
    by_param: Vec<Option<Matrix>>,
}

impl Grads {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.by_param.get(id).and_then(|g| g.as_ref())
    }

    /// Sum a batch of gradient sets element-wise, in input order.
    pub fn sum(mut parts: Vec<Grads>) -> Grads {
        let mut acc = parts.remove(0);
        for p in parts {
            for (slot, g) in acc.by_param.iter_mut().zip(p.by_param) {
                match (slot.as_mut(), g) {
                    (Some(a), Some(b)) => a.axpy(1.0, &b),
                    (None, Some(b)) => *slot = Some(b),
                    _ => {}
                }
            }
        }
        acc
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.by_param.iter_mut().flatten() {
            for v in g.data_mut() {
                *v *= c;
            }
        }
    }
}

pub struct Tape<'a> {
    params: &'a ParamSet,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

impl<'a> Tape<'a> {
    pub fn new(params: &'a ParamSet) -> Self {
        Self { params, nodes: Vec::new(), param_nodes: HashMap::new() }
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, m: Matrix) -> NodeId {
        self.push(m, Op::Const)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let n = self.push(self.params.get(id).clone(), Op::Param(id));
        self.param_nodes.insert(id, n);
        n
    }

    pub fn matmul_nn(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.matmul_nn(&self.nodes[b].value);
        self.push(v, Op::MatMulNN(a, b))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.matmul_nt(&self.nodes[b].value);
        self.push(v, Op::MatMulNT(a, b))
    }

    pub fn matmul_tn(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.matmul_tn(&self.nodes[b].value);
        self.push(v, Op::MatMulTN(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.add(&self.nodes[b].value);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.sub(&self.nodes[b].value);
        self.push(v, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.hadamard(&self.nodes[b].value);
        self.push(v, Op::Hadamard(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.nodes[a].value.scale(c);
        self.push(v, Op::Scale(a, c))
    }

    /// Add a 1xN row vector to every row of an MxN matrix.
    pub fn add_row_broadcast(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let xm = &self.nodes[x].value;
        let rm = &self.nodes[row].value;
        assert_eq!(rm.rows(), 1);
        assert_eq!(rm.cols(), xm.cols());
        let mut v = xm.clone();
        for r in 0..v.rows() {
            for (o, &b) in v.row_mut(r).iter_mut().zip(rm.data()) {
                *o += b;
            }
        }
        self.push(v, Op::AddRowBroadcast(x, row))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.map(gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    /// Row-wise layer norm with learned gain and bias (both 1xN).
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> NodeId {
        let xm = &self.nodes[x].value;
        let g = &self.nodes[gain].value;
        let b = &self.nodes[bias].value;
        let (rows, cols) = (xm.rows(), xm.cols());
        let mut xhat = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let row = xm.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for c in 0..cols {
                let xh = (row[c] - mean) * is;
                xhat.set(r, c, xh);
                out.set(r, c, xh * g.data()[c] + b.data()[c]);
            }
        }
        self.push(out, Op::LayerNorm { x, gain, bias, xhat, inv_std })
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let v = softmax_rows(&self.nodes[x].value);
        self.push(v, Op::SoftmaxRows(x))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.nodes[parts[0]].value.cols();
        let rows: usize = parts.iter().map(|&p| self.nodes[p].value.rows()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            let m = &self.nodes[p].value;
            assert_eq!(m.cols(), cols);
            data.extend_from_slice(m.data());
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let m = &self.nodes[x].value;
        assert!(start + len <= m.rows());
        let cols = m.cols();
        let data = m.data()[start * cols..(start + len) * cols].to_vec();
        self.push(Matrix::from_vec(len, cols, data), Op::SliceRows { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0]].value.rows();
        let cols: usize = parts.iter().map(|&p| self.nodes[p].value.cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut at = 0;
        for &p in parts {
            let m = &self.nodes[p].value;
            assert_eq!(m.rows(), rows);
            for r in 0..rows {
                out.row_mut(r)[at..at + m.cols()].copy_from_slice(m.row(r));
            }
            at += m.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let m = &self.nodes[x].value;
        assert!(start + len <= m.cols());
        let mut out = Matrix::zeros(m.rows(), len);
        for r in 0..m.rows() {
            out.row_mut(r).copy_from_slice(&m.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols { x, start })
    }

    /// Rows of `table` selected by index (embedding lookup).
    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let t = &self.nodes[table].value;
        let mut out = Matrix::zeros(ids.len(), t.cols());
        for (r, &i) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(i));
        }
        self.push(out, Op::GatherRows { table, ids: ids.to_vec() })
    }

    /// Shift rows by `offset` (positive moves content toward higher row
    /// indices), zero-filling vacated rows.
    pub fn shift_rows(&mut self, x: NodeId, offset: i64) -> NodeId {
        let m = &self.nodes[x].value;
        let rows = m.rows() as i64;
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for r in 0..rows {
            let src = r - offset;
            if src >= 0 && src < rows {
                out.row_mut(r as usize).copy_from_slice(m.row(src as usize));
            }
        }
        self.push(out, Op::ShiftRows { x, offset })
    }

    /// Mean NLL of `targets` under row-wise softmax of `logits`. Rows with
    /// `None` are ignored. Returns a 1x1 node.
    pub fn cross_entropy_rows(&mut self, logits: NodeId, targets: &[Option<usize>]) -> NodeId {
        let lm = &self.nodes[logits].value;
        assert_eq!(lm.rows(), targets.len());
        let sm = softmax_rows(lm);
        let count = targets.iter().filter(|t| t.is_some()).count();
        assert!(count > 0, "cross entropy needs at least one target row");
        let mut total = 0.0;
        for (r, t) in targets.iter().enumerate() {
            if let Some(t) = *t {
                // log softmax directly from the stable pass
                let row = lm.row(r);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let logsum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
                total += logsum - row[t];
            }
        }
        let loss = total / count as f64;
        self.push(
            Matrix::from_vec(1, 1, vec![loss]),
            Op::CrossEntropyRows { logits, targets: targets.to_vec(), softmax: sm, count },
        )
    }

    /// MSE over the selected rows of `pred` against a constant target,
    /// normalized by (selected rows x cols). Returns a 1x1 node.
    pub fn mse_rows(&mut self, pred: NodeId, target: &Matrix, row_mask: &[bool]) -> NodeId {
        let pm = &self.nodes[pred].value;
        assert_eq!((pm.rows(), pm.cols()), (target.rows(), target.cols()));
        assert_eq!(pm.rows(), row_mask.len());
        let count = row_mask.iter().filter(|&&m| m).count();
        assert!(count > 0, "mse needs at least one selected row");
        let denom = (count * pm.cols()) as f64;
        let mut total = 0.0;
        for r in 0..pm.rows() {
            if row_mask[r] {
                for (p, t) in pm.row(r).iter().zip(target.row(r)) {
                    let d = p - t;
                    total += d * d;
                }
            }
        }
        self.push(
            Matrix::from_vec(1, 1, vec![total / denom]),
            Op::MseRows { pred, target: target.clone(), row_mask: row_mask.to_vec(), count },
        )
    }

    /// Backprop from a 1x1 loss node; returns per-parameter gradients.
    pub fn backward(&self, loss: NodeId) -> Grads {
        assert_eq!(self.nodes[loss].value.len(), 1, "loss must be scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Matrix::from_vec(1, 1, vec![1.0]));

        let mut by_param: Vec<Option<Matrix>> = (0..self.params.len()).map(|_| None).collect();

        for i in (0..self.nodes.len()).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Const => {}
                Op::Param(pid) => match &mut by_param[*pid] {
                    Some(acc) => acc.axpy(1.0, &g),
                    slot => *slot = Some(g),
                },
                Op::MatMulNN(a, b) => {
                    let da = g.matmul_nt(&self.nodes[*b].value);
                    let db = self.nodes[*a].value.matmul_tn(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulNT(a, b) => {
                    let da = g.matmul_nn(&self.nodes[*b].value);
                    let db = g.matmul_tn(&self.nodes[*a].value);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulTN(a, b) => {
                    let da = self.nodes[*b].value.matmul_nt(&g);
                    let db = self.nodes[*a].value.matmul_nn(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.scale(-1.0));
                    accumulate(&mut grads, *a, g);
                }
                Op::Hadamard(a, b) => {
                    let da = g.hadamard(&self.nodes[*b].value);
                    let db = g.hadamard(&self.nodes[*a].value);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.scale(*c)),
                Op::AddRowBroadcast(x, row) => {
                    let mut drow = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in drow.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *x, g);
                    accumulate(&mut grads, *row, drow);
                }
                Op::Gelu(a) => {
                    let x = &self.nodes[*a].value;
                    let mut da = g.clone();
                    for (d, &xv) in da.data_mut().iter_mut().zip(x.data()) {
                        *d *= gelu_deriv(xv);
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = g.clone();
                    for (d, &yv) in da.data_mut().iter_mut().zip(y.data()) {
                        *d *= 1.0 - yv * yv;
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                    let gm = &self.nodes[*gain].value;
                    let (rows, cols) = (g.rows(), g.cols());
                    let mut dgain = Matrix::zeros(1, cols);
                    let mut dbias = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        let grow = g.row(r);
                        let xh = xhat.row(r);
                        for c in 0..cols {
                            dgain.data_mut()[c] += grow[c] * xh[c];
                            dbias.data_mut()[c] += grow[c];
                        }
                        // dxhat = g * gain; standard layer-norm backward
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for c in 0..cols {
                            let dxh = grow[c] * gm.data()[c];
                            m1 += dxh;
                            m2 += dxh * xh[c];
                        }
                        m1 /= cols as f64;
                        m2 /= cols as f64;
                        for c in 0..cols {
                            let dxh = grow[c] * gm.data()[c];
                            dx.set(r, c, inv_std[r] * (dxh - m1 - xh[c] * m2));
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gain, dgain);
                    accumulate(&mut grads, *bias, dbias);
                }
                Op::SoftmaxRows(x) => {
                    let y = &self.nodes[i].value;
                    let mut dx = Matrix::zeros(g.rows(), g.cols());
                    for r in 0..g.rows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                        for c in 0..g.cols() {
                            dx.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let rows = self.nodes[p].value.rows();
                        let cols = g.cols();
                        let slice = Matrix::from_vec(
                            rows,
                            cols,
                            g.data()[at * cols..(at + rows) * cols].to_vec(),
                        );
                        accumulate(&mut grads, p, slice);
                        at += rows;
                    }
                }
                Op::SliceRows { x, start } => {
                    let xm = &self.nodes[*x].value;
                    let mut dx = Matrix::zeros(xm.rows(), xm.cols());
                    for r in 0..g.rows() {
                        dx.row_mut(start + r).copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let m = &self.nodes[p].value;
                        let mut dp = Matrix::zeros(m.rows(), m.cols());
                        for r in 0..m.rows() {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[at..at + m.cols()]);
                        }
                        accumulate(&mut grads, p, dp);
                        at += m.cols();
                    }
                }
                Op::SliceCols { x, start } => {
                    let xm = &self.nodes[*x].value;
                    let mut dx = Matrix::zeros(xm.rows(), xm.cols());
                    for r in 0..g.rows() {
                        dx.row_mut(r)[*start..start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::GatherRows { table, ids } => {
                    let tm = &self.nodes[*table].value;
                    let mut dt = Matrix::zeros(tm.rows(), tm.cols());
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, &v) in dt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::ShiftRows { x, offset } => {
                    let xm = &self.nodes[*x].value;
                    let rows = xm.rows() as i64;
                    let mut dx = Matrix::zeros(xm.rows(), xm.cols());
                    for r in 0..rows {
                        let src = r - offset;
                        if src >= 0 && src < rows {
                            dx.row_mut(src as usize).copy_from_slice(g.row(r as usize));
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::CrossEntropyRows { logits, targets, softmax, count } => {
                    let s = g.scalar() / *count as f64;
                    let mut dl = softmax.clone();
                    for (r, t) in targets.iter().enumerate() {
                        match *t {
                            Some(t) => {
                                let row = dl.row_mut(r);
                                row[t] -= 1.0;
                                for v in row.iter_mut() {
                                    *v *= s;
                                }
                            }
                            None => {
                                for v in dl.row_mut(r).iter_mut() {
                                    *v = 0.0;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *logits, dl);
                }
                Op::MseRows { pred, target, row_mask, count } => {
                    let pm = &self.nodes[*pred].value;
                    let denom = (*count * pm.cols()) as f64;
                    let s = g.scalar() * 2.0 / denom;
                    let mut dp = Matrix::zeros(pm.rows(), pm.cols());
                    for r in 0..pm.rows() {
                        if row_mask[r] {
                            for c in 0..pm.cols() {
                                dp.set(r, c, s * (pm.get(r, c) - target.get(r, c)));
                            }
                        }
                    }
                    accumulate(&mut grads, *pred, dp);
                }
            }
        }

        Grads { by_param }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], node: NodeId, g: Matrix) {
    match &mut grads[node] {
        Some(acc) => acc.axpy(1.0, &g),
        slot => *slot = Some(g),
    }
}

pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

// tanh-form gelu; erf is not in std
fn gelu(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_deriv(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
    let u = SQRT_2_OVER_PI * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_gradients;
    use crate::util::seeded_rng;

    #[test]
    fn composite_graph_matches_finite_differences() {
        let mut params = ParamSet::new();
        let w1 = params.add_init("w1", 6, 5, 11);
        let b1 = params.add_init("b1", 1, 5, 11);
        let w2 = params.add_init("w2", 5, 4, 11);
        let gain = params.add("gain", Matrix::from_fn(1, 5, |_, _| 1.0));
        let bias = params.add_zeros("bias", 1, 5);
        let mut rng = seeded_rng(3, "tape-test");
        let x = Matrix::randn(3, 6, 1.0, &mut rng);
        let target = Matrix::randn(3, 4, 1.0, &mut rng);
        let mask = vec![true, false, true];

        let f = |ps: &ParamSet| {
            let mut t = Tape::new(ps);
            let xn = t.constant(x.clone());
            let w1n = t.param(w1);
            let b1n = t.param(b1);
            let h = t.matmul_nn(xn, w1n);
            let h = t.add_row_broadcast(h, b1n);
            let gn = t.param(gain);
            let bn = t.param(bias);
            let h = t.layer_norm(h, gn, bn, 1e-5);
            let h = t.gelu(h);
            let w2n = t.param(w2);
            let y = t.matmul_nn(h, w2n);
            let loss = t.mse_rows(y, &target, &mask);
            (t.value(loss).scalar(), t.backward(loss))
        };
        let worst = check_gradients(&mut params, &[w1, b1, w2, gain, bias], 1.0, f, 77);
        assert!(worst < 1e-5, "worst rel err {worst}");
    }

    #[test]
    fn attention_style_graph_matches_finite_differences() {
        let mut params = ParamSet::new();
        let wq = params.add_init("wq", 4, 4, 5);
        let wk = params.add_init("wk", 4, 4, 5);
        let wv = params.add_init("wv", 4, 4, 5);
        let emb = params.add_init("emb", 7, 4, 5);
        let mut rng = seeded_rng(4, "attn-test");
        let causal = {
            let n = 3;
            Matrix::from_fn(n, n, |r, c| if c > r { -1e9 } else { 0.0 })
        };
        let _ = Matrix::randn(1, 1, 1.0, &mut rng);

        let f = |ps: &ParamSet| {
            let mut t = Tape::new(ps);
            let e = t.param(emb);
            let x = t.gather_rows(e, &[1, 4, 2]);
            let wqn = t.param(wq);
            let wkn = t.param(wk);
            let wvn = t.param(wv);
            let q = t.matmul_nn(x, wqn);
            let k = t.matmul_nn(x, wkn);
            let v = t.matmul_nn(x, wvn);
            let s = t.matmul_nt(q, k);
            let s = t.scale(s, 0.5);
            let mask = t.constant(causal.clone());
            let s = t.add(s, mask);
            let a = t.softmax_rows(s);
            let o = t.matmul_nn(a, v);
            let logits = t.matmul_nt(o, e);
            let loss = t.cross_entropy_rows(logits, &[Some(4), Some(2), Some(0)]);
            (t.value(loss).scalar(), t.backward(loss))
        };
        let worst = check_gradients(&mut params, &[wq, wk, wv, emb], 1.0, f, 78);
        assert!(worst < 1e-6, "worst rel err {worst}");
    }
}
