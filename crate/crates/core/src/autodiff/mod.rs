//! Minimal reverse-mode automatic differentiation on dense `f64` tensors.
//!
//! A [`Tape`] records every operation whose inputs include at least one
//! tracked tensor. [`Tape::backward`] replays the record in reverse,
//! accumulating adjoints, and adds the result into each tracked node's
//! persistent gradient buffer, so repeated backward passes sum their
//! contributions until [`Tape::zero_grads`] is called.
//!
//! Tensors are row-major, rank 1 or 2. There is no broadcasting except
//! adding a rank-1 bias vector to every row of a matrix.

pub mod checkpoint;

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

/// Dense tensor handle. Cloning is cheap (the buffer is shared), and
/// values are immutable once created.
#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Rc<Vec<f64>>,
    tracked: Option<(Tape, usize)>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("values", &self.values)
            .field("tracked", &self.tracked.as_ref().map(|(_, id)| *id))
            .finish()
    }
}

/// Recording of all tracked nodes and the operations connecting them.
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

struct TapeInner {
    nodes: Vec<Node>,
    ops: Vec<Op>,
}

struct Node {
    grad: Vec<f64>,
}

/// One operation input: forward values plus the node id when tracked.
struct Src {
    values: Rc<Vec<f64>>,
    shape: Vec<usize>,
    node: Option<usize>,
}

impl Src {
    fn of(t: &Tensor) -> Src {
        Src {
            values: Rc::clone(&t.values),
            shape: t.shape.clone(),
            node: t.tracked.as_ref().map(|(_, id)| *id),
        }
    }
}

enum Op {
    Matmul { a: Src, b: Src, out: usize },
    Add { a: Src, b: Src, out: usize },
    AddBias { a: Src, bias: Src, out: usize },
    Mul { a: Src, b: Src, out: usize },
    ScalarMul { a: Src, factor: f64, out: usize },
    Concat { parts: Vec<Src>, axis: usize, out: usize },
    Mean { a: Src, axis: usize, out: usize },
    Relu { a: Src, out: usize },
    LeakyRelu { a: Src, slope: f64, out: usize },
    Tanh { a: Src, out: usize },
    Softmax { a: Src, axis: usize, out: usize },
    Transpose { a: Src, out: usize },
    Reshape { a: Src, out: usize },
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                ops: Vec::new(),
            })),
        }
    }

    fn same_as(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    /// Creates a tracked tensor whose gradient will be available after
    /// backward passes.
    pub fn leaf(&self, shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, values.len())?;
        let values = Rc::new(values);
        let id = self.push_node(values.len());
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
            tracked: Some((self.clone(), id)),
        })
    }

    fn push_node(&self, len: usize) -> usize {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            grad: vec![0.0; len],
        });
        id
    }

    fn record(&self, op: Op) {
        self.inner.borrow_mut().ops.push(op);
    }

    /// Number of recorded operations.
    pub fn op_count(&self) -> usize {
        self.inner.borrow().ops.len()
    }

    pub fn zero_grads(&self) {
        for node in self.inner.borrow_mut().nodes.iter_mut() {
            node.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Accumulates d`loss`/d`node` into every tracked node's gradient.
    /// `loss` must be a single-element tensor tracked on this tape.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        let (loss_tape, loss_node) = loss
            .tracked
            .as_ref()
            .ok_or_else(|| Error::Usage("backward on an untracked tensor".into()))?;
        if !self.same_as(loss_tape) {
            return Err(Error::Usage("loss belongs to a different tape".into()));
        }
        if loss.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss.shape
            )));
        }

        let mut inner = self.inner.borrow_mut();
        // Fresh adjoints per pass; only the final accumulation touches the
        // persistent gradients, which keeps repeated passes additive.
        let mut adjoint: Vec<Option<Vec<f64>>> = vec![None; inner.nodes.len()];
        adjoint[*loss_node] = Some(vec![1.0]);

        for i in (0..inner.ops.len()).rev() {
            propagate(&inner.ops[i], &mut adjoint);
        }

        for (node, adj) in inner.nodes.iter_mut().zip(&adjoint) {
            if let Some(adj) = adj {
                for (g, a) in node.grad.iter_mut().zip(adj) {
                    *g += a;
                }
            }
        }
        Ok(())
    }
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.is_empty() || shape.len() > 2 {
        return Err(Error::Usage(format!(
            "tensors are rank 1 or 2, got shape {shape:?}"
        )));
    }
    let numel: usize = shape.iter().product();
    if numel != len {
        return Err(Error::Usage(format!(
            "shape {shape:?} does not hold {len} values"
        )));
    }
    Ok(())
}

fn take(adjoint: &mut [Option<Vec<f64>>], id: usize, len: usize) -> &mut Vec<f64> {
    adjoint[id].get_or_insert_with(|| vec![0.0; len])
}

/// Routes the output adjoint of one op into its tracked inputs.
fn propagate(op: &Op, adjoint: &mut [Option<Vec<f64>>]) {
    // Output adjoint is cloned out first so input slots can be borrowed
    // mutably; all buffers involved are small.
    macro_rules! out_adj {
        ($out:expr) => {
            match &adjoint[*$out] {
                Some(a) => a.clone(),
                None => return,
            }
        };
    }

    match op {
        Op::Matmul { a, b, out } => {
            let d = out_adj!(out);
            let (m, k) = (a.shape[0], a.shape[1]);
            let n = b.shape[1];
            if let Some(ia) = a.node {
                let ga = take(adjoint, ia, m * k);
                for i in 0..m {
                    for kk in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += d[i * n + j] * b.values[kk * n + j];
                        }
                        ga[i * k + kk] += s;
                    }
                }
            }
            if let Some(ib) = b.node {
                let gb = take(adjoint, ib, k * n);
                for kk in 0..k {
                    for j in 0..n {
                        let mut s = 0.0;
                        for i in 0..m {
                            s += a.values[i * k + kk] * d[i * n + j];
                        }
                        gb[kk * n + j] += s;
                    }
                }
            }
        }
        Op::Add { a, b, out } => {
            let d = out_adj!(out);
            for src in [a, b] {
                if let Some(id) = src.node {
                    let g = take(adjoint, id, d.len());
                    for (g, dv) in g.iter_mut().zip(&d) {
                        *g += dv;
                    }
                }
            }
        }
        Op::AddBias { a, bias, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let g = take(adjoint, id, d.len());
                for (g, dv) in g.iter_mut().zip(&d) {
                    *g += dv;
                }
            }
            if let Some(id) = bias.node {
                let n = bias.shape[0];
                let g = take(adjoint, id, n);
                for (row, chunk) in d.chunks(n).enumerate() {
                    let _ = row;
                    for (g, dv) in g.iter_mut().zip(chunk) {
                        *g += dv;
                    }
                }
            }
        }
        Op::Mul { a, b, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let g = take(adjoint, id, d.len());
                for i in 0..d.len() {
                    g[i] += d[i] * b.values[i];
                }
            }
            if let Some(id) = b.node {
                let g = take(adjoint, id, d.len());
                for i in 0..d.len() {
                    g[i] += d[i] * a.values[i];
                }
            }
        }
        Op::ScalarMul { a, factor, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let g = take(adjoint, id, d.len());
                for i in 0..d.len() {
                    g[i] += d[i] * factor;
                }
            }
        }
        Op::Concat { parts, axis, out } => {
            let d = out_adj!(out);
            if *axis == 0 || parts[0].shape.len() == 1 {
                let mut offset = 0;
                for p in parts {
                    let len = p.values.len();
                    if let Some(id) = p.node {
                        let g = take(adjoint, id, len);
                        for i in 0..len {
                            g[i] += d[offset + i];
                        }
                    }
                    offset += len;
                }
            } else {
                // axis 1: rows stay aligned, columns are split
                let rows = parts[0].shape[0];
                let total_cols: usize = parts.iter().map(|p| p.shape[1]).sum();
                let mut col_offset = 0;
                for p in parts {
                    let cols = p.shape[1];
                    if let Some(id) = p.node {
                        let g = take(adjoint, id, rows * cols);
                        for r in 0..rows {
                            for c in 0..cols {
                                g[r * cols + c] += d[r * total_cols + col_offset + c];
                            }
                        }
                    }
                    col_offset += cols;
                }
            }
        }
        Op::Mean { a, axis, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let g = take(adjoint, id, a.values.len());
                if a.shape.len() == 1 {
                    let inv = 1.0 / a.shape[0] as f64;
                    for gi in g.iter_mut() {
                        *gi += d[0] * inv;
                    }
                } else {
                    let (m, n) = (a.shape[0], a.shape[1]);
                    if *axis == 0 {
                        let inv = 1.0 / m as f64;
                        for i in 0..m {
                            for j in 0..n {
                                g[i * n + j] += d[j] * inv;
                            }
                        }
                    } else {
                        let inv = 1.0 / n as f64;
                        for i in 0..m {
                            for j in 0..n {
                                g[i * n + j] += d[i] * inv;
                            }
                        }
                    }
                }
            }
        }
        Op::Relu { a, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let g = take(adjoint, id, d.len());
                for i in 0..d.len() {
                    if a.values[i] > 0.0 {
                        g[i] += d[i];
                    }
                }
            }
        }
        Op::LeakyRelu { a, slope, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let g = take(adjoint, id, d.len());
                for i in 0..d.len() {
                    g[i] += d[i] * if a.values[i] > 0.0 { 1.0 } else { *slope };
                }
            }
        }
        Op::Tanh { a, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let g = take(adjoint, id, d.len());
                for i in 0..d.len() {
                    let y = a.values[i].tanh();
                    g[i] += d[i] * (1.0 - y * y);
                }
            }
        }
        Op::Softmax { a, axis, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let y = softmax_values(&a.values, &a.shape, *axis);
                let g = take(adjoint, id, d.len());
                let (rows, cols, row_major) = softmax_lanes(&a.shape, *axis);
                for r in 0..rows {
                    let idx = |c: usize| if row_major { r * cols + c } else { c * rows + r };
                    let mut dot = 0.0;
                    for c in 0..cols {
                        dot += d[idx(c)] * y[idx(c)];
                    }
                    for c in 0..cols {
                        g[idx(c)] += y[idx(c)] * (d[idx(c)] - dot);
                    }
                }
            }
        }
        Op::Transpose { a, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let (m, n) = (a.shape[0], a.shape[1]);
                let g = take(adjoint, id, m * n);
                for i in 0..m {
                    for j in 0..n {
                        g[i * n + j] += d[j * m + i];
                    }
                }
            }
        }
        Op::Reshape { a, out } => {
            let d = out_adj!(out);
            if let Some(id) = a.node {
                let g = take(adjoint, id, d.len());
                for i in 0..d.len() {
                    g[i] += d[i];
                }
            }
        }
    }
}

/// Softmax lane geometry: `rows` independent lanes of `cols` entries each;
/// `row_major` tells whether a lane is contiguous.
fn softmax_lanes(shape: &[usize], axis: usize) -> (usize, usize, bool) {
    if shape.len() == 1 {
        (1, shape[0], true)
    } else if axis == 1 {
        (shape[0], shape[1], true)
    } else {
        (shape[1], shape[0], false)
    }
}

fn softmax_values(values: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let (rows, cols, row_major) = softmax_lanes(shape, axis);
    let mut out = vec![0.0; values.len()];
    for r in 0..rows {
        let idx = |c: usize| if row_major { r * cols + c } else { c * rows + r };
        let max = (0..cols).map(|c| values[idx(c)]).fold(f64::MIN, f64::max);
        let mut sum = 0.0;
        for c in 0..cols {
            let e = (values[idx(c)] - max).exp();
            out[idx(c)] = e;
            sum += e;
        }
        for c in 0..cols {
            out[idx(c)] /= sum;
        }
    }
    out
}

impl Tensor {
    /// Untracked tensor; participates in operations but never receives a
    /// gradient buffer.
    pub fn constant(shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, values.len())?;
        Ok(Tensor {
            shape: shape.to_vec(),
            values: Rc::new(values),
            tracked: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            values: Rc::new(vec![0.0; shape.iter().product()]),
            tracked: None,
        }
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            values: Rc::new(vec![1.0; shape.iter().product()]),
            tracked: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.len() != 1 {
            return Err(Error::Usage(format!(
                "item() on shape {:?}",
                self.shape
            )));
        }
        Ok(self.values[0])
    }

    pub fn is_tracked(&self) -> bool {
        self.tracked.is_some()
    }

    /// Accumulated gradient for a tracked tensor; `None` for constants.
    pub fn grad(&self) -> Option<Vec<f64>> {
        let (tape, id) = self.tracked.as_ref()?;
        Some(tape.inner.borrow().nodes[*id].grad.clone())
    }

    fn result_tape(inputs: &[&Tensor]) -> Result<Option<Tape>> {
        let mut found: Option<Tape> = None;
        for t in inputs {
            if let Some((tape, _)) = &t.tracked {
                match &found {
                    None => found = Some(tape.clone()),
                    Some(existing) if existing.same_as(tape) => {}
                    Some(_) => {
                        return Err(Error::Usage(
                            "operation mixes tensors from different tapes".into(),
                        ))
                    }
                }
            }
        }
        Ok(found)
    }

    fn emit(
        inputs: &[&Tensor],
        shape: Vec<usize>,
        values: Vec<f64>,
        make_op: impl FnOnce(usize) -> Op,
    ) -> Result<Tensor> {
        let tape = Tensor::result_tape(inputs)?;
        let values = Rc::new(values);
        let tracked = match tape {
            Some(tape) => {
                let id = tape.push_node(values.len());
                tape.record(make_op(id));
                Some((tape, id))
            }
            None => None,
        };
        Ok(Tensor {
            shape,
            values,
            tracked,
        })
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for kk in 0..k {
                let a = self.values[i * k + kk];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.values[kk * n + j];
                }
            }
        }
        Tensor::emit(&[self, other], vec![m, n], out, |id| Op::Matmul {
            a: Src::of(self),
            b: Src::of(other),
            out: id,
        })
    }

    /// Elementwise sum of same-shape tensors, or a rank-1 bias added to
    /// every row of a matrix (the only broadcast supported).
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape == other.shape {
            let values = self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a + b)
                .collect();
            return Tensor::emit(&[self, other], self.shape.clone(), values, |id| Op::Add {
                a: Src::of(self),
                b: Src::of(other),
                out: id,
            });
        }
        if self.shape.len() == 2 && other.shape.len() == 1 && self.shape[1] == other.shape[0] {
            let n = other.shape[0];
            let values = self
                .values
                .iter()
                .enumerate()
                .map(|(i, a)| a + other.values[i % n])
                .collect();
            return Tensor::emit(&[self, other], self.shape.clone(), values, |id| {
                Op::AddBias {
                    a: Src::of(self),
                    bias: Src::of(other),
                    out: id,
                }
            });
        }
        Err(Error::ShapeMismatch {
            op: "add",
            lhs: self.shape.clone(),
            rhs: other.shape.clone(),
        })
    }

    /// Elementwise product; shapes must match exactly.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "mul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .collect();
        Tensor::emit(&[self, other], self.shape.clone(), values, |id| Op::Mul {
            a: Src::of(self),
            b: Src::of(other),
            out: id,
        })
    }

    pub fn scalar_mul(&self, factor: f64) -> Result<Tensor> {
        let values = self.values.iter().map(|v| v * factor).collect();
        Tensor::emit(&[self], self.shape.clone(), values, |id| Op::ScalarMul {
            a: Src::of(self),
            factor,
            out: id,
        })
    }

    /// Concatenates tensors of equal rank along `axis`.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Usage("concat of zero tensors".into()))?;
        let rank = first.shape.len();
        if axis >= rank {
            return Err(Error::Usage(format!(
                "concat axis {axis} out of range for rank {rank}"
            )));
        }
        for p in parts {
            if p.shape.len() != rank
                || (rank == 2 && p.shape[1 - axis] != first.shape[1 - axis])
            {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape.clone(),
                    rhs: p.shape.clone(),
                });
            }
        }

        let (shape, values) = if rank == 1 || axis == 0 {
            let mut values = Vec::new();
            for p in parts {
                values.extend_from_slice(&p.values);
            }
            let shape = if rank == 1 {
                vec![values.len()]
            } else {
                vec![parts.iter().map(|p| p.shape[0]).sum(), first.shape[1]]
            };
            (shape, values)
        } else {
            let rows = first.shape[0];
            let total_cols: usize = parts.iter().map(|p| p.shape[1]).sum();
            let mut values = vec![0.0; rows * total_cols];
            let mut col_offset = 0;
            for p in parts {
                let cols = p.shape[1];
                for r in 0..rows {
                    for c in 0..cols {
                        values[r * total_cols + col_offset + c] = p.values[r * cols + c];
                    }
                }
                col_offset += cols;
            }
            (vec![rows, total_cols], values)
        };

        Tensor::emit(parts, shape, values, |id| Op::Concat {
            parts: parts.iter().map(|p| Src::of(p)).collect(),
            axis,
            out: id,
        })
    }

    /// Mean along `axis`, keeping the reduced axis with extent 1 (a rank-1
    /// input reduces to a single element).
    pub fn mean(&self, axis: usize) -> Result<Tensor> {
        if axis >= self.shape.len() {
            return Err(Error::Usage(format!(
                "mean axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        let (shape, values) = if self.shape.len() == 1 {
            let m = self.shape[0] as f64;
            (vec![1], vec![self.values.iter().sum::<f64>() / m])
        } else {
            let (m, n) = (self.shape[0], self.shape[1]);
            if axis == 0 {
                let mut out = vec![0.0; n];
                for i in 0..m {
                    for j in 0..n {
                        out[j] += self.values[i * n + j];
                    }
                }
                out.iter_mut().for_each(|v| *v /= m as f64);
                (vec![1, n], out)
            } else {
                let mut out = vec![0.0; m];
                for i in 0..m {
                    for j in 0..n {
                        out[i] += self.values[i * n + j];
                    }
                }
                out.iter_mut().for_each(|v| *v /= n as f64);
                (vec![m, 1], out)
            }
        };
        Tensor::emit(&[self], shape, values, |id| Op::Mean {
            a: Src::of(self),
            axis,
            out: id,
        })
    }

    pub fn relu(&self) -> Result<Tensor> {
        let values = self.values.iter().map(|&v| v.max(0.0)).collect();
        Tensor::emit(&[self], self.shape.clone(), values, |id| Op::Relu {
            a: Src::of(self),
            out: id,
        })
    }

    pub fn leaky_relu(&self, slope: f64) -> Result<Tensor> {
        let values = self
            .values
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        Tensor::emit(&[self], self.shape.clone(), values, |id| Op::LeakyRelu {
            a: Src::of(self),
            slope,
            out: id,
        })
    }

    pub fn tanh(&self) -> Result<Tensor> {
        let values = self.values.iter().map(|v| v.tanh()).collect();
        Tensor::emit(&[self], self.shape.clone(), values, |id| Op::Tanh {
            a: Src::of(self),
            out: id,
        })
    }

    /// Numerically stable softmax along `axis`; every lane sums to one.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        if axis >= self.shape.len() {
            return Err(Error::Usage(format!(
                "softmax axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        let values = softmax_values(&self.values, &self.shape, axis);
        Tensor::emit(&[self], self.shape.clone(), values, |id| Op::Softmax {
            a: Src::of(self),
            axis,
            out: id,
        })
    }

    /// Rank-2 transpose.
    pub fn transpose(&self) -> Result<Tensor> {
        if self.shape.len() != 2 {
            return Err(Error::Usage(format!(
                "transpose needs rank 2, got {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut values = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                values[j * m + i] = self.values[i * n + j];
            }
        }
        Tensor::emit(&[self], vec![n, m], values, |id| Op::Transpose {
            a: Src::of(self),
            out: id,
        })
    }

    /// Reinterprets the buffer under a new shape with the same element
    /// count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape(shape, self.len())?;
        Tensor::emit(
            &[self],
            shape.to_vec(),
            self.values.as_ref().clone(),
            |id| Op::Reshape {
                a: Src::of(self),
                out: id,
            },
        )
    }
}
