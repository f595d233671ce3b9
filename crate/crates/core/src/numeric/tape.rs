//! Reverse-mode differentiation over 2-D `f64` arrays.
//!
//! A [`Tape`] records every primitive in execution order. Nodes are
//! append-only, so node index order is execution order and the backward
//! sweep simply walks the node list in reverse. Parameters are borrowed from
//! a [`ParamStore`] rather than copied; their gradients come back as a
//! [`Gradients`] value that the caller installs on the store.

use rand::Rng;

use super::tensor::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    Gather { param: ParamId, rows: Vec<usize> },
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Relu(Var),
    Sigmoid(Var),
    Map { x: Var, deriv: Vec<f64> },
    Softmax { x: Var, mask: Option<Vec<bool>> },
    DropMask { x: Var, mask: Vec<f64> },
    ConcatCols(Vec<Var>),
    StackRows(Vec<Var>),
    Sum(Var),
    SumSquares(Var),
    Bce { pred: Var, labels: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Value,
    op: Op,
    needs_grad: bool,
}

/// Lower clamp applied to predictions inside the cross-entropy primitive.
pub const BCE_EPS: f64 = 1e-12;

/// Per-parameter gradients produced by [`Tape::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Vec<Option<Vec<f64>>>);

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.0.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn into_inner(self) -> Vec<Option<Vec<f64>>> {
        self.0
    }
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::with_capacity(256),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].value {
            Value::Owned(d) => d,
            Value::Param(id) => self.store.get(*id).data(),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.shape(v), (1, 1));
        self.value(v)[0]
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, data.len());
        let needs_grad = match &op {
            Op::Const => false,
            Op::Param(_) | Op::Gather { .. } => true,
            Op::MatMul(a, b) | Op::MatMulT(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => {
                self.needs(*a) || self.needs(*b)
            }
            Op::Transpose(x)
            | Op::Scale(x, _)
            | Op::Tanh(x)
            | Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Map { x, .. }
            | Op::Softmax { x, .. }
            | Op::DropMask { x, .. }
            | Op::Sum(x)
            | Op::SumSquares(x) => self.needs(*x),
            Op::Bce { pred, .. } => self.needs(*pred),
            Op::ConcatCols(xs) | Op::StackRows(xs) => xs.iter().any(|x| self.needs(*x)),
        };
        self.nodes.push(Node {
            rows,
            cols,
            value: Value::Owned(data),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn dim_err<T>(&self, op: &'static str, a: Var, b: Var) -> Result<T> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        Err(Error::Dimension {
            op,
            left: vec![ar, ac],
            right: vec![br, bc],
        })
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::Shape {
                shape: vec![rows, cols],
                len: data.len(),
            });
        }
        Ok(self.push(rows, cols, data, Op::Const))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.push(rows, cols, vec![0.0; rows * cols], Op::Const)
    }

    /// Leaf node for a whole parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let (rows, cols) = self.store.get(id).dims2();
        self.nodes.push(Node {
            rows,
            cols,
            value: Value::Param(id),
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// Selects rows of a parameter matrix (embedding lookup).
    pub fn gather(&mut self, id: ParamId, rows: &[usize]) -> Result<Var> {
        let t = self.store.get(id);
        let (nrows, cols) = t.dims2();
        let mut out = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if r >= nrows {
                return Err(Error::Index {
                    what: "embedding row",
                    index: r,
                    len: nrows,
                });
            }
            out.extend_from_slice(t.row(r));
        }
        if rows.is_empty() {
            return Err(Error::DegenerateInput("gather with no rows"));
        }
        Ok(self.push(
            rows.len(),
            cols,
            out,
            Op::Gather {
                param: id,
                rows: rows.to_vec(),
            },
        ))
    }

    /// `a · b` for `a: m×k`, `b: k×n`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return self.dim_err("matmul", a, b);
        }
        let mut out = vec![0.0; m * n];
        mm(self.value(a), self.value(b), &mut out, m, k, n);
        Ok(self.push(m, n, out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ` for `a: m×k`, `b: n×k`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        if k != k2 {
            return self.dim_err("matmul_t", a, b);
        }
        let mut out = vec![0.0; m * n];
        mm_t(self.value(a), self.value(b), &mut out, m, k, n);
        Ok(self.push(m, n, out, Op::MatMulT(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let src = self.value(a);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        self.push(n, m, out, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return self.dim_err("add", a, b);
        }
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let (r, c) = self.shape(a);
        Ok(self.push(r, c, out, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return self.dim_err("mul", a, b);
        }
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let (r, c) = self.shape(a);
        Ok(self.push(r, c, out, Op::Mul(a, b)))
    }

    /// Adds the `1 × n` row `row` to every row of the `m × n` matrix `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = self.shape(a);
        if self.shape(row) != (1, n) {
            return self.dim_err("add_row", a, row);
        }
        let r = self.value(row);
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x + r[i % n])
            .collect();
        Ok(self.push(m, n, out, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * c).collect();
        let (r, n) = self.shape(a);
        self.push(r, n, out, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.tanh()).collect();
        let (r, n) = self.shape(a);
        self.push(r, n, out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.max(0.0)).collect();
        let (r, n) = self.shape(a);
        self.push(r, n, out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        let (r, n) = self.shape(a);
        self.push(r, n, out, Op::Sigmoid(a))
    }

    /// Elementwise function with a caller-supplied derivative.
    pub fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Var {
        let x = self.value(a);
        let out = x.iter().map(|&v| f(v)).collect();
        let deriv = x.iter().map(|&v| df(v)).collect();
        let (r, n) = self.shape(a);
        self.push(r, n, out, Op::Map { x: a, deriv })
    }

    /// Row-wise softmax. Masked (`false`) positions are excluded from the
    /// normalization and come out as exactly zero.
    pub fn row_softmax(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var> {
        let (m, n) = self.shape(x);
        if let Some(mask) = mask {
            if mask.len() != m * n {
                return Err(Error::Dimension {
                    op: "row_softmax mask",
                    left: vec![m, n],
                    right: vec![mask.len()],
                });
            }
        }
        let src = self.value(x);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let live = |j: usize| mask.map_or(true, |mk| mk[i * n + j]);
            let row = &src[i * n..(i + 1) * n];
            let max = (0..n)
                .filter(|&j| live(j))
                .map(|j| row[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::DegenerateRow { row: i });
            }
            let mut total = 0.0;
            for j in 0..n {
                if live(j) {
                    let e = (row[j] - max).exp();
                    out[i * n + j] = e;
                    total += e;
                }
            }
            out[i * n..(i + 1) * n].iter_mut().for_each(|v| *v /= total);
        }
        Ok(self.push(
            m,
            n,
            out,
            Op::Softmax {
                x,
                mask: mask.map(<[bool]>::to_vec),
            },
        ))
    }

    /// Inverted dropout: each element is zeroed with probability `rate`,
    /// survivors are scaled by `1 / (1 - rate)`. Outside training, or with
    /// a zero rate, the input node is returned unchanged.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let (r, c) = self.shape(x);
        let mask: Vec<f64> = (0..r * c)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let out = zip_map(self.value(x), &mask, |a, b| a * b);
        Ok(self.push(r, c, out, Op::DropMask { x, mask }))
    }

    /// Concatenates nodes with equal row counts side by side.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(Error::DegenerateInput("concat of nothing"));
        };
        let rows = self.shape(first).0;
        let mut cols = 0;
        for &x in xs {
            if self.shape(x).0 != rows {
                return self.dim_err("concat_cols", first, x);
            }
            cols += self.shape(x).1;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &x in xs {
                let c = self.shape(x).1;
                out.extend_from_slice(&self.value(x)[i * c..(i + 1) * c]);
            }
        }
        Ok(self.push(rows, cols, out, Op::ConcatCols(xs.to_vec())))
    }

    /// Stacks nodes with equal column counts on top of each other.
    pub fn stack_rows(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(Error::DegenerateInput("stack of nothing"));
        };
        let cols = self.shape(first).1;
        let mut rows = 0;
        for &x in xs {
            if self.shape(x).1 != cols {
                return self.dim_err("stack_rows", first, x);
            }
            rows += self.shape(x).0;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for &x in xs {
            out.extend_from_slice(self.value(x));
        }
        Ok(self.push(rows, cols, out, Op::StackRows(xs.to_vec())))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(x))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().map(|v| v * v).sum();
        self.push(1, 1, vec![s], Op::SumSquares(x))
    }

    /// Summed binary cross-entropy `-Σ r·ln p + (1-r)·ln(1-p)`, with `p`
    /// clamped to `[BCE_EPS, 1 - BCE_EPS]`.
    pub fn bce(&mut self, pred: Var, labels: &[f64]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != labels.len() {
            let (r, c) = self.shape(pred);
            return Err(Error::Dimension {
                op: "bce",
                left: vec![r, c],
                right: vec![labels.len()],
            });
        }
        if let Some(bad) = labels.iter().find(|&&r| r != 0.0 && r != 1.0) {
            return Err(Error::Validation(format!("label {bad} is not 0 or 1")));
        }
        let loss = p
            .iter()
            .zip(labels)
            .map(|(&p, &r)| {
                let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(r * p.ln() + (1.0 - r) * (1.0 - p).ln())
            })
            .sum();
        Ok(self.push(
            1,
            1,
            vec![loss],
            Op::Bce {
                pred,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a `1 × 1` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::Dimension {
                op: "backward",
                left: vec![r, c],
                right: vec![1, 1],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![1.0]);
        let mut out: Vec<Option<Vec<f64>>> = vec![None; self.store.len()];

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Const => {}
                Op::Param(id) => add_into(&mut out[id.0], &g),
                Op::Gather { param, rows } => {
                    let t = self.store.get(*param);
                    let cols = node.cols;
                    let dst = out[param.0].get_or_insert_with(|| vec![0.0; t.len()]);
                    for (i, &r) in rows.iter().enumerate() {
                        for j in 0..cols {
                            dst[r * cols + j] += g[i * cols + j];
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    if self.needs(*a) {
                        // dA = dC · Bᵀ
                        let mut da = vec![0.0; m * k];
                        mm_t(&g, self.value(*b), &mut da, m, n, k);
                        acc(&mut grads, *a, &da);
                    }
                    if self.needs(*b) {
                        // dB = Aᵀ · dC
                        let av = self.value(*a);
                        let mut db = vec![0.0; k * n];
                        for i in 0..m {
                            for p in 0..k {
                                let aip = av[i * k + p];
                                if aip == 0.0 {
                                    continue;
                                }
                                let row = &g[i * n..(i + 1) * n];
                                let dst = &mut db[p * n..(p + 1) * n];
                                for j in 0..n {
                                    dst[j] += aip * row[j];
                                }
                            }
                        }
                        acc(&mut grads, *b, &db);
                    }
                }
                Op::MatMulT(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    if self.needs(*a) {
                        // dA = dC · B
                        let mut da = vec![0.0; m * k];
                        mm(&g, self.value(*b), &mut da, m, n, k);
                        acc(&mut grads, *a, &da);
                    }
                    if self.needs(*b) {
                        // dB = dCᵀ · A
                        let av = self.value(*a);
                        let mut db = vec![0.0; n * k];
                        for i in 0..m {
                            let arow = &av[i * k..(i + 1) * k];
                            for j in 0..n {
                                let gij = g[i * n + j];
                                if gij == 0.0 {
                                    continue;
                                }
                                let dst = &mut db[j * k..(j + 1) * k];
                                for p in 0..k {
                                    dst[p] += gij * arow[p];
                                }
                            }
                        }
                        acc(&mut grads, *b, &db);
                    }
                }
                Op::Transpose(a) => {
                    let (m, n) = self.shape(*a);
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            da[i * n + j] = g[j * m + i];
                        }
                    }
                    acc(&mut grads, *a, &da);
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        acc(&mut grads, *a, &g);
                    }
                    if self.needs(*b) {
                        acc(&mut grads, *b, &g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        let d = zip_map(&g, self.value(*b), |x, y| x * y);
                        acc(&mut grads, *a, &d);
                    }
                    if self.needs(*b) {
                        let d = zip_map(&g, self.value(*a), |x, y| x * y);
                        acc(&mut grads, *b, &d);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.needs(*a) {
                        acc(&mut grads, *a, &g);
                    }
                    if self.needs(*row) {
                        let n = node.cols;
                        let mut dr = vec![0.0; n];
                        for (i, v) in g.iter().enumerate() {
                            dr[i % n] += v;
                        }
                        acc(&mut grads, *row, &dr);
                    }
                }
                Op::Scale(a, c) => {
                    let d: Vec<f64> = g.iter().map(|v| v * c).collect();
                    acc(&mut grads, *a, &d);
                }
                Op::Tanh(a) => {
                    let y = self.value(Var(idx));
                    let d = zip_map(&g, y, |gv, yv| gv * (1.0 - yv * yv));
                    acc(&mut grads, *a, &d);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let d = zip_map(&g, x, |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                    acc(&mut grads, *a, &d);
                }
                Op::Sigmoid(a) => {
                    let y = self.value(Var(idx));
                    let d = zip_map(&g, y, |gv, yv| gv * yv * (1.0 - yv));
                    acc(&mut grads, *a, &d);
                }
                Op::Map { x, deriv } => {
                    let d = zip_map(&g, deriv, |a, b| a * b);
                    acc(&mut grads, *x, &d);
                }
                Op::Softmax { x, mask } => {
                    let y = self.value(Var(idx));
                    let (m, n) = (node.rows, node.cols);
                    let mut dx = vec![0.0; m * n];
                    for i in 0..m {
                        let r = i * n..(i + 1) * n;
                        let dot: f64 = y[r.clone()].iter().zip(&g[r.clone()]).map(|(a, b)| a * b).sum();
                        for j in r {
                            if mask.as_ref().map_or(true, |mk| mk[j]) {
                                dx[j] = y[j] * (g[j] - dot);
                            }
                        }
                    }
                    acc(&mut grads, *x, &dx);
                }
                Op::DropMask { x, mask } => {
                    let d = zip_map(&g, mask, |a, b| a * b);
                    acc(&mut grads, *x, &d);
                }
                Op::ConcatCols(xs) => {
                    let rows = node.rows;
                    let total = node.cols;
                    let mut offset = 0;
                    for &x in xs {
                        let c = self.shape(x).1;
                        if self.needs(x) {
                            let mut d = Vec::with_capacity(rows * c);
                            for i in 0..rows {
                                d.extend_from_slice(&g[i * total + offset..i * total + offset + c]);
                            }
                            acc(&mut grads, x, &d);
                        }
                        offset += c;
                    }
                }
                Op::StackRows(xs) => {
                    let mut offset = 0;
                    for &x in xs {
                        let len = self.value(x).len();
                        if self.needs(x) {
                            acc(&mut grads, x, &g[offset..offset + len]);
                        }
                        offset += len;
                    }
                }
                Op::Sum(x) => {
                    let len = self.value(*x).len();
                    acc(&mut grads, *x, &vec![g[0]; len]);
                }
                Op::SumSquares(x) => {
                    let d: Vec<f64> = self.value(*x).iter().map(|v| 2.0 * v * g[0]).collect();
                    acc(&mut grads, *x, &d);
                }
                Op::Bce { pred, labels } => {
                    let p = self.value(*pred);
                    let d: Vec<f64> = p
                        .iter()
                        .zip(labels)
                        .map(|(&p, &r)| {
                            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                            g[0] * (-r / p + (1.0 - r) / (1.0 - p))
                        })
                        .collect();
                    acc(&mut grads, *pred, &d);
                }
            }
        }
        Ok(Gradients(out))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn add_into(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(d) => d.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    add_into(&mut grads[v.0], g);
}

/// `out += a · b` with `a: m×k`, `b: k×n`.
fn mm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let dst = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                dst[j] += aip * brow[j];
            }
        }
    }
}

/// `out += a · bᵀ` with `a: m×k`, `b: n×k`.
fn mm_t(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}
