use std::borrow::Cow;

use crate::kernels;
use crate::{Gradients, ParamId, Params, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    MeanRows(Var),
    RepeatRows(Var),
    Transpose(Var),
    Sum(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    LogSigmoid(Var),
    SoftmaxRows(Var),
    LogSumExpRows(Var),
    GatherMean(Var, Vec<Vec<usize>>),
}

impl Op {
    fn any_parent(&self, mut f: impl FnMut(Var) -> bool) -> bool {
        match self {
            Op::Input | Op::Param(_) => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => {
                f(*a) || f(*b)
            }
            Op::ConcatCols(parts) | Op::ConcatRows(parts) => parts.iter().any(|&p| f(p)),
            Op::Scale(x, _)
            | Op::SliceCols(x, _)
            | Op::SliceRows(x, _)
            | Op::MeanRows(x)
            | Op::RepeatRows(x)
            | Op::Transpose(x)
            | Op::Sum(x)
            | Op::Tanh(x)
            | Op::Sigmoid(x)
            | Op::Exp(x)
            | Op::Log(x)
            | Op::LogSigmoid(x)
            | Op::SoftmaxRows(x)
            | Op::LogSumExpRows(x)
            | Op::GatherMean(x, _) => f(*x),
        }
    }
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Ordered record of elementary operations.
///
/// Nodes are appended as operations run, so every operand precedes its
/// consumers and the record is acyclic by construction. Parameter leaves
/// borrow their tensors from a [`Params`] collection for the lifetime `'p`.
#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let (r, c) = x.dims();
    Tensor::raw(r, c, x.values().iter().map(|&v| f(v)).collect())
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = op.any_parent(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant leaf; no gradient flows into it.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Input,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A trainable leaf borrowing its value from `params`.
    pub fn param(&mut self, params: &'p Params, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(params.get(id)),
            op: Op::Param(id),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (ta.dims(), tb.dims());
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        kernels::matmul_acc(ta.values(), tb.values(), &mut out, m, k, n);
        Ok(self.push(Tensor::raw(m, n, out), Op::MatMul(a, b)))
    }

    fn zip_same(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.dims() != tb.dims() {
            return Err(mismatch(op, ta, tb));
        }
        let (r, c) = ta.dims();
        let values = ta
            .values()
            .iter()
            .zip(tb.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Tensor::raw(r, c, values))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    /// Adds a `1 x c` row to every row of an `r x c` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (tx, tr) = (self.value(x), self.value(row));
        let (r, c) = tx.dims();
        if tr.dims() != (1, c) {
            return Err(mismatch("add_row", tx, tr));
        }
        let mut out = tx.values().to_vec();
        for chunk in out.chunks_mut(c.max(1)) {
            for (o, &b) in chunk.iter_mut().zip(tr.values()) {
                *o += b;
            }
        }
        Ok(self.push(Tensor::raw(r, c, out), Op::AddRow(x, row)))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let t = map(self.value(x), |v| v * s);
        self.push(t, Op::Scale(x, s))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or(TensorError::Empty { op: "concat_cols" })?;
        let rows = self.value(first).rows();
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(mismatch("concat_cols", self.value(first), t));
            }
            total += t.cols();
        }
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        Ok(self.push(
            Tensor::raw(rows, total, out),
            Op::ConcatCols(parts.to_vec()),
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or(TensorError::Empty { op: "concat_rows" })?;
        let cols = self.value(first).cols();
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(mismatch("concat_rows", self.value(first), t));
            }
            rows += t.rows();
            out.extend_from_slice(t.values());
        }
        Ok(self.push(Tensor::raw(rows, cols, out), Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = t.dims();
        if start + len > c {
            return Err(TensorError::OutOfRange {
                op: "slice_cols",
                index: start + len,
                len: c,
            });
        }
        let mut out = Vec::with_capacity(r * len);
        for row in 0..r {
            out.extend_from_slice(&t.row_slice(row)[start..start + len]);
        }
        Ok(self.push(Tensor::raw(r, len, out), Op::SliceCols(x, start)))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = t.dims();
        if start + len > r {
            return Err(TensorError::OutOfRange {
                op: "slice_rows",
                index: start + len,
                len: r,
            });
        }
        let out = t.values()[start * c..(start + len) * c].to_vec();
        Ok(self.push(Tensor::raw(len, c, out), Op::SliceRows(x, start)))
    }

    /// Column-wise mean over rows, giving `1 x c`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = t.dims();
        if r == 0 {
            return Err(TensorError::Empty { op: "mean_rows" });
        }
        let mut out = vec![0.0; c];
        for row in 0..r {
            for (o, &v) in out.iter_mut().zip(t.row_slice(row)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= r as f64);
        Ok(self.push(Tensor::raw(1, c, out), Op::MeanRows(x)))
    }

    /// Stacks `n` copies of a `1 x c` row.
    pub fn repeat_rows(&mut self, x: Var, n: usize) -> Result<Var> {
        let t = self.value(x);
        if t.rows() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "repeat_rows",
                lhs: t.shape().to_vec(),
                rhs: vec![1, t.cols()],
            });
        }
        let c = t.cols();
        let out = t.values().repeat(n);
        Ok(self.push(Tensor::raw(n, c, out), Op::RepeatRows(x)))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (r, c) = t.dims();
        let v = t.values();
        let out = (0..c * r).map(|i| v[(i % r) * c + i / r]).collect();
        self.push(Tensor::raw(c, r, out), Op::Transpose(x))
    }

    /// Sum of all elements as a `1 x 1` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).values().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = map(self.value(x), f64::tanh);
        self.push(t, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = map(self.value(x), kernels::sigmoid);
        self.push(t, Op::Sigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let t = map(self.value(x), f64::exp);
        self.push(t, Op::Exp(x))
    }

    /// Natural log; every element must be strictly positive.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if let Some((index, &value)) = t.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(TensorError::NonFinite {
                index,
                value: value.ln(),
            });
        }
        let t = map(t, f64::ln);
        Ok(self.push(t, Op::Log(x)))
    }

    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        let t = map(self.value(x), kernels::log_sigmoid);
        self.push(t, Op::LogSigmoid(x))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (r, c) = t.dims();
        let mut out = vec![0.0; r * c];
        for row in 0..r {
            kernels::softmax_into(t.row_slice(row), &mut out[row * c..(row + 1) * c]);
        }
        self.push(Tensor::raw(r, c, out), Op::SoftmaxRows(x))
    }

    /// Per-row `log(sum(exp(x)))`, giving `r x 1`.
    pub fn log_sum_exp_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let r = t.rows();
        let out = (0..r)
            .map(|row| kernels::log_sum_exp(t.row_slice(row)))
            .collect();
        self.push(Tensor::raw(r, 1, out), Op::LogSumExpRows(x))
    }

    /// Row `i` of the result is the mean of `table` rows listed in
    /// `groups[i]`, or zeros when the group is empty.
    pub fn gather_mean(&mut self, table: Var, groups: Vec<Vec<usize>>) -> Result<Var> {
        let t = self.value(table);
        let (rows, c) = t.dims();
        let mut out = vec![0.0; groups.len() * c];
        for (i, group) in groups.iter().enumerate() {
            let orow = &mut out[i * c..(i + 1) * c];
            for &idx in group {
                if idx >= rows {
                    return Err(TensorError::OutOfRange {
                        op: "gather_mean",
                        index: idx,
                        len: rows,
                    });
                }
                for (o, &v) in orow.iter_mut().zip(t.row_slice(idx)) {
                    *o += v;
                }
            }
            if !group.is_empty() {
                let n = group.len() as f64;
                orow.iter_mut().for_each(|o| *o /= n);
            }
        }
        let n = groups.len();
        Ok(self.push(Tensor::raw(n, c, out), Op::GatherMean(table, groups)))
    }

    /// Gradients of a scalar output with respect to every parameter of
    /// `params`. Parameters not reached from `out` get zero gradients.
    pub fn backward(&self, out: Var, params: &Params) -> Result<Gradients> {
        let mut grads = params.zero_gradients();
        self.backward_into(out, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Tape::backward`] but accumulates into existing buffers.
    pub fn backward_into(&self, out: Var, grads: &mut Gradients) -> Result<()> {
        let out_value = self.value(out);
        if out_value.len() != 1 {
            return Err(TensorError::NonScalar(out_value.shape().to_vec()));
        }
        let mut node_grads: Vec<Option<Tensor>> = Vec::new();
        node_grads.resize_with(out.0 + 1, || None);
        let mut seed = Tensor::zeros_like(out_value);
        seed.fill(1.0);
        node_grads[out.0] = Some(seed);

        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = node_grads[i].take() else {
                continue;
            };
            let g = g.values();
            let y = node.value.as_ref();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    for (a, b) in grads.get_mut(*id).values_mut().iter_mut().zip(g) {
                        *a += b;
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ((m, k), (_, n)) = (ta.dims(), tb.dims());
                    if let Some(ga) = self.slot(*a, &mut node_grads, grads) {
                        kernels::matmul_nt_acc(g, tb.values(), ga, m, k, n);
                    }
                    if let Some(gb) = self.slot(*b, &mut node_grads, grads) {
                        kernels::matmul_tn_acc(ta.values(), g, gb, m, k, n);
                    }
                }
                Op::Add(a, b) => {
                    for (v, sign) in [(*a, 1.0), (*b, 1.0)] {
                        if let Some(gv) = self.slot(v, &mut node_grads, grads) {
                            axpy(sign, g, gv);
                        }
                    }
                }
                Op::Sub(a, b) => {
                    for (v, sign) in [(*a, 1.0), (*b, -1.0)] {
                        if let Some(gv) = self.slot(v, &mut node_grads, grads) {
                            axpy(sign, g, gv);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    for (v, other) in [(*a, *b), (*b, *a)] {
                        let other = self.value(other).values();
                        if let Some(gv) = self.slot(v, &mut node_grads, grads) {
                            for ((o, &gi), &w) in gv.iter_mut().zip(g).zip(other) {
                                *o += gi * w;
                            }
                        }
                    }
                }
                Op::AddRow(x, row) => {
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        axpy(1.0, g, gx);
                    }
                    let c = y.cols();
                    if let Some(gr) = self.slot(*row, &mut node_grads, grads) {
                        for chunk in g.chunks(c.max(1)) {
                            axpy(1.0, chunk, gr);
                        }
                    }
                }
                Op::Scale(x, s) => {
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        axpy(*s, g, gx);
                    }
                }
                Op::ConcatCols(parts) => {
                    let (rows, total) = y.dims();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        if let Some(gp) = self.slot(p, &mut node_grads, grads) {
                            for r in 0..rows {
                                let src = &g[r * total + offset..r * total + offset + w];
                                axpy(1.0, src, &mut gp[r * w..(r + 1) * w]);
                            }
                        }
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        if let Some(gp) = self.slot(p, &mut node_grads, grads) {
                            axpy(1.0, &g[offset..offset + len], gp);
                        }
                        offset += len;
                    }
                }
                Op::SliceCols(x, start) => {
                    let c = self.value(*x).cols();
                    let (rows, w) = y.dims();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for r in 0..rows {
                            let dst = &mut gx[r * c + start..r * c + start + w];
                            axpy(1.0, &g[r * w..(r + 1) * w], dst);
                        }
                    }
                }
                Op::SliceRows(x, start) => {
                    let c = y.cols();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        axpy(1.0, g, &mut gx[start * c..start * c + g.len()]);
                    }
                }
                Op::MeanRows(x) => {
                    let r = self.value(*x).rows();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        let c = g.len();
                        for chunk in gx.chunks_mut(c.max(1)) {
                            for (o, &gi) in chunk.iter_mut().zip(g) {
                                *o += gi / r as f64;
                            }
                        }
                    }
                }
                Op::RepeatRows(x) => {
                    let c = y.cols();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for chunk in g.chunks(c.max(1)) {
                            axpy(1.0, chunk, gx);
                        }
                    }
                }
                Op::Transpose(x) => {
                    let (r, c) = self.value(*x).dims();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for i in 0..r {
                            for j in 0..c {
                                gx[i * c + j] += g[j * r + i];
                            }
                        }
                    }
                }
                Op::Sum(x) => {
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        gx.iter_mut().for_each(|o| *o += g[0]);
                    }
                }
                Op::Tanh(x) => {
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for ((o, &gi), &yi) in gx.iter_mut().zip(g).zip(y.values()) {
                            *o += gi * (1.0 - yi * yi);
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for ((o, &gi), &yi) in gx.iter_mut().zip(g).zip(y.values()) {
                            *o += gi * yi * (1.0 - yi);
                        }
                    }
                }
                Op::Exp(x) => {
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for ((o, &gi), &yi) in gx.iter_mut().zip(g).zip(y.values()) {
                            *o += gi * yi;
                        }
                    }
                }
                Op::Log(x) => {
                    let xv = self.value(*x).values();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for ((o, &gi), &xi) in gx.iter_mut().zip(g).zip(xv) {
                            *o += gi / xi;
                        }
                    }
                }
                Op::LogSigmoid(x) => {
                    let xv = self.value(*x).values();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for ((o, &gi), &xi) in gx.iter_mut().zip(g).zip(xv) {
                            *o += gi * kernels::sigmoid(-xi);
                        }
                    }
                }
                Op::SoftmaxRows(x) => {
                    let c = y.cols();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        for ((grow, yrow), orow) in
                            g.chunks(c).zip(y.values().chunks(c)).zip(gx.chunks_mut(c))
                        {
                            let s: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                            for ((o, &gi), &yi) in orow.iter_mut().zip(grow).zip(yrow) {
                                *o += yi * (gi - s);
                            }
                        }
                    }
                }
                Op::LogSumExpRows(x) => {
                    let tx = self.value(*x);
                    let c = tx.cols();
                    if let Some(gx) = self.slot(*x, &mut node_grads, grads) {
                        let mut p = vec![0.0; c];
                        for (row, &gi) in g.iter().enumerate() {
                            kernels::softmax_into(tx.row_slice(row), &mut p);
                            axpy(gi, &p, &mut gx[row * c..(row + 1) * c]);
                        }
                    }
                }
                Op::GatherMean(table, groups) => {
                    let c = y.cols();
                    if let Some(gt) = self.slot(*table, &mut node_grads, grads) {
                        for (i, group) in groups.iter().enumerate() {
                            if group.is_empty() {
                                continue;
                            }
                            let n = group.len() as f64;
                            let grow = &g[i * c..(i + 1) * c];
                            for &idx in group {
                                for (o, &gi) in gt[idx * c..(idx + 1) * c].iter_mut().zip(grow) {
                                    *o += gi / n;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Gradient buffer for `v`: the external parameter buffer for parameter
    /// leaves, a lazily zeroed node buffer otherwise, `None` when no
    /// parameter is upstream of `v`.
    fn slot<'g>(
        &self,
        v: Var,
        node_grads: &'g mut [Option<Tensor>],
        grads: &'g mut Gradients,
    ) -> Option<&'g mut [f64]> {
        let node = &self.nodes[v.0];
        if !node.needs_grad {
            return None;
        }
        if let Op::Param(id) = node.op {
            return Some(grads.get_mut(id).values_mut());
        }
        Some(
            node_grads[v.0]
                .get_or_insert_with(|| Tensor::zeros_like(&node.value))
                .values_mut(),
        )
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (o, &xi) in y.iter_mut().zip(x) {
        *o += alpha * xi;
    }
}
