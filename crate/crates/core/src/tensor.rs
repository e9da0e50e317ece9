//! Dense row-major matrices and a reverse-mode differentiation tape.
//!
//! Every forward operation appends a node holding its value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates gradients for the parameters
//! that were pulled onto the tape with [`Tape::param`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, sqrt};
use crate::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} values for a {rows}×{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    /// `self · other`
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`
    fn matmul_bt(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.cols);
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = a.iter().zip(other.row(j)).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    /// `selfᵀ · other`
    fn matmul_at(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.rows, other.rows);
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let b = other.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &y) in orow.iter_mut().zip(b) {
                    *o += a * y;
                }
            }
        }
        out
    }

    fn column_sums(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, &x) in out.data.iter_mut().zip(self.row(r)) {
                *o += x;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A learnable tensor with its Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub first_moment: Matrix,
    pub second_moment: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let (r, c) = value.shape();
        Self { name: name.into(), value, first_moment: Matrix::zeros(r, c), second_moment: Matrix::zeros(r, c) }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    /// Optimizer steps taken so far.
    pub step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Copy of the parameter values with fresh optimizer state.
    pub fn values_only(&self) -> ParamStore {
        ParamStore {
            params: self.params.iter().map(|p| Parameter::new(p.name.clone(), p.value.clone())).collect(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.data.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }
}

/// Gradients indexed by [`ParamId`]; parameters not reached by backward stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self { grads: store.iter().map(|p| Matrix::zeros(p.value.rows, p.value.cols)).collect() }
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Silu(Var),
    Sigmoid(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    SegmentMean(Var, Vec<usize>, Vec<usize>),
    LayerNorm { x: Var, gain: Var, shift: Var, normalized: Matrix, inv_std: Vec<f64> },
    Mse(Var, Vec<f64>),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Recorded forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
    non_finite: Option<&'static str>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

fn shape_err(what: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::ShapeMismatch(format!("{what}: {}×{} vs {}×{}", a.0, a.1, b.0, b.1))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Matrix, op: Op, name: &'static str) -> Var {
        if self.non_finite.is_none() && !value.is_finite() {
            self.non_finite = Some(name);
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fails when any recorded value was NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.non_finite {
            Some(op) => Err(Error::NonFinite(op)),
            None => Ok(()),
        }
    }

    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Input, "input")
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id), "parameter")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols != bv.rows {
            return Err(shape_err("matmul", av.shape(), bv.shape()));
        }
        let out = av.matmul(bv);
        Ok(self.push(out, Op::MatMul(a, b), "matmul"))
    }

    /// Adds a `1×m` row to every row of an `n×m` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows != 1 || bv.cols != xv.cols {
            return Err(shape_err("add_bias", xv.shape(), bv.shape()));
        }
        let mut out = xv.clone();
        for r in 0..out.rows {
            out.row_mut(r).iter_mut().zip(&bv.data).for_each(|(o, b)| *o += b);
        }
        Ok(self.push(out, Op::AddBias(x, bias), "add_bias"))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", av.shape(), bv.shape()));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        Ok(self.push(out, Op::Add(a, b), "add"))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("mul", av.shape(), bv.shape()));
        }
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
        let out = Matrix { rows: av.rows, cols: av.cols, data };
        Ok(self.push(out, Op::Mul(a, b), "mul"))
    }

    pub fn silu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v * sigmoid(v));
        self.push(out, Op::Silu(x), "silu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x), "sigmoid")
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(out, Op::Relu(x), "relu")
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map(|&p| self.value(p).rows).unwrap_or(0);
        if let Some(&bad) = parts.iter().find(|&&p| self.value(p).rows != rows) {
            return Err(shape_err("concat", (rows, 0), self.value(bad).shape()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut at = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.data[r * cols + at..r * cols + at + src.len()].copy_from_slice(src);
                at += src.len();
            }
        }
        Ok(self.push(out, Op::Concat(parts.to_vec()), "concat"))
    }

    /// `out[k] = x[index[k]]`
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= xv.rows) {
            return Err(Error::ShapeMismatch(format!("gather index {bad} ≥ {} rows", xv.rows)));
        }
        let mut out = Matrix::zeros(index.len(), xv.cols);
        for (k, &i) in index.iter().enumerate() {
            out.row_mut(k).copy_from_slice(xv.row(i));
        }
        Ok(self.push(out, Op::Gather(x, index.to_vec()), "gather"))
    }

    /// `out[index[k]] += x[k]` into `num_rows` zero-initialized rows.
    pub fn scatter_add_rows(&mut self, x: Var, index: &[usize], num_rows: usize) -> Result<Var> {
        let xv = self.value(x);
        if index.len() != xv.rows {
            return Err(Error::ShapeMismatch(format!("scatter of {} rows with {} indices", xv.rows, index.len())));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= num_rows) {
            return Err(Error::ShapeMismatch(format!("scatter index {bad} ≥ {num_rows}")));
        }
        let mut out = Matrix::zeros(num_rows, xv.cols);
        for (k, &i) in index.iter().enumerate() {
            out.row_mut(i).iter_mut().zip(xv.row(k)).for_each(|(o, v)| *o += v);
        }
        Ok(self.push(out, Op::ScatterAdd(x, index.to_vec()), "scatter_add"))
    }

    /// Row means per segment; every segment must be non-empty.
    pub fn segment_mean(&mut self, x: Var, segment: &[usize], num_segments: usize) -> Result<Var> {
        let xv = self.value(x);
        if segment.len() != xv.rows {
            return Err(Error::ShapeMismatch("segment ids must match rows".into()));
        }
        let mut counts = vec![0usize; num_segments];
        for &s in segment {
            if s >= num_segments {
                return Err(Error::ShapeMismatch(format!("segment {s} ≥ {num_segments}")));
            }
            counts[s] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::ShapeMismatch("empty segment in mean".into()));
        }
        let mut out = Matrix::zeros(num_segments, xv.cols);
        for (k, &s) in segment.iter().enumerate() {
            out.row_mut(s).iter_mut().zip(xv.row(k)).for_each(|(o, v)| *o += v);
        }
        for (s, &c) in counts.iter().enumerate() {
            let inv = 1.0 / c as f64;
            out.row_mut(s).iter_mut().for_each(|o| *o *= inv);
        }
        Ok(self.push(out, Op::SegmentMean(x, segment.to_vec(), counts), "segment_mean"))
    }

    /// Per-row standardization followed by `gain ⊙ x̂ + shift` (both `1×m`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, shift: Var) -> Result<Var> {
        let (xv, gv, sv) = (self.value(x), self.value(gain), self.value(shift));
        if xv.cols == 0 || gv.shape() != (1, xv.cols) || sv.shape() != (1, xv.cols) {
            return Err(shape_err("layer_norm", xv.shape(), gv.shape()));
        }
        let m = xv.cols as f64;
        let mut normalized = Matrix::zeros(xv.rows, xv.cols);
        let mut inv_std = Vec::with_capacity(xv.rows);
        let mut out = Matrix::zeros(xv.rows, xv.cols);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / m;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
            let inv = 1.0 / sqrt(var + LAYER_NORM_EPS);
            inv_std.push(inv);
            for (c, &x) in row.iter().enumerate() {
                let z = (x - mean) * inv;
                normalized.data[r * xv.cols + c] = z;
                out.data[r * xv.cols + c] = z * gv.data[c] + sv.data[c];
            }
        }
        Ok(self.push(out, Op::LayerNorm { x, gain, shift, normalized, inv_std }, "layer_norm"))
    }

    /// `(1/B) Σ (pred − target)²` for a `B×1` prediction.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let pv = self.value(pred);
        if pv.cols != 1 || pv.rows != target.len() || target.is_empty() {
            return Err(shape_err("mse", pv.shape(), (target.len(), 1)));
        }
        let loss = pv.data.iter().zip(target).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / target.len() as f64;
        Ok(self.push(Matrix::filled(1, 1, loss), Op::Mse(pred, target.to_vec()), "mse"))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Matrix::filled(1, 1, s), Op::Sum(x), "sum")
    }

    /// Reverse pass from a `1×1` loss. Can run once per recorded graph.
    pub fn backward(&mut self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(shape_err("backward on non-scalar", self.value(loss).shape(), (1, 1)));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        let mut out = Gradients::zeros_like(store);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, d: Matrix| match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&d),
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => out.grads[id.0].add_assign(&g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    acc(*a, g.matmul_bt(bv));
                    acc(*b, av.matmul_at(&g));
                }
                Op::AddBias(x, b) => {
                    acc(*b, g.column_sums());
                    acc(*x, g);
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let da = zip_map(&g, bv, |d, y| d * y);
                    let db = zip_map(&g, av, |d, x| d * x);
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::Silu(x) => {
                    let xv = &self.nodes[x.0].value;
                    acc(
                        *x,
                        zip_map(&g, xv, |d, v| {
                            let s = sigmoid(v);
                            d * s * (1.0 + v * (1.0 - s))
                        }),
                    );
                }
                Op::Sigmoid(x) => {
                    acc(*x, zip_map(&g, &node.value, |d, s| d * s * (1.0 - s)));
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[x.0].value;
                    acc(*x, zip_map(&g, xv, |d, v| if v > 0.0 { d } else { 0.0 }));
                }
                Op::Concat(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.nodes[p.0].value.cols;
                        let mut d = Matrix::zeros(g.rows, w);
                        for r in 0..g.rows {
                            d.row_mut(r).copy_from_slice(&g.row(r)[at..at + w]);
                        }
                        at += w;
                        acc(p, d);
                    }
                }
                Op::Gather(x, index) => {
                    let xv = &self.nodes[x.0].value;
                    let mut d = Matrix::zeros(xv.rows, xv.cols);
                    for (k, &i) in index.iter().enumerate() {
                        d.row_mut(i).iter_mut().zip(g.row(k)).for_each(|(o, v)| *o += v);
                    }
                    acc(*x, d);
                }
                Op::ScatterAdd(x, index) => {
                    let mut d = Matrix::zeros(index.len(), g.cols);
                    for (k, &i) in index.iter().enumerate() {
                        d.row_mut(k).copy_from_slice(g.row(i));
                    }
                    acc(*x, d);
                }
                Op::SegmentMean(x, segment, counts) => {
                    let mut d = Matrix::zeros(segment.len(), g.cols);
                    for (k, &s) in segment.iter().enumerate() {
                        let inv = 1.0 / counts[s] as f64;
                        d.row_mut(k).iter_mut().zip(g.row(s)).for_each(|(o, v)| *o = v * inv);
                    }
                    acc(*x, d);
                }
                Op::LayerNorm { x, gain, shift, normalized, inv_std } => {
                    let gv = &self.nodes[gain.0].value;
                    let cols = g.cols;
                    let m = cols as f64;
                    let mut dgain = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(g.rows, cols);
                    for (r, &inv) in inv_std.iter().enumerate() {
                        let (dy, z) = (g.row(r), normalized.row(r));
                        let mut mean_dz = 0.0;
                        let mut mean_dz_z = 0.0;
                        for c in 0..cols {
                            dgain.data[c] += dy[c] * z[c];
                            let dz = dy[c] * gv.data[c];
                            mean_dz += dz;
                            mean_dz_z += dz * z[c];
                        }
                        mean_dz /= m;
                        mean_dz_z /= m;
                        let row = dx.row_mut(r);
                        for c in 0..cols {
                            let dz = dy[c] * gv.data[c];
                            row[c] = inv * (dz - mean_dz - z[c] * mean_dz_z);
                        }
                    }
                    acc(*shift, g.column_sums());
                    acc(*gain, dgain);
                    acc(*x, dx);
                }
                Op::Mse(pred, target) => {
                    let pv = &self.nodes[pred.0].value;
                    let scale = 2.0 * g.data[0] / target.len() as f64;
                    let data = pv.data.iter().zip(target).map(|(p, y)| scale * (p - y)).collect();
                    acc(*pred, Matrix { rows: pv.rows, cols: 1, data });
                }
                Op::Sum(x) => {
                    let xv = &self.nodes[x.0].value;
                    acc(*x, Matrix::filled(xv.rows, xv.cols, g.data[0]));
                }
            }
        }
        Ok(out)
    }
}

fn zip_map(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    Matrix { rows: a.rows, cols: a.cols, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut store = ParamStore::new();
        let id = store.add("theta", m(1, 3, &[1.0, -2.0, 0.5]));
        let unused = store.add("unused", m(1, 1, &[3.0]));
        let mut tape = Tape::new();
        let t = tape.param(&store, id);
        let sq = tape.mul(t, t).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss, &store).unwrap();
        assert_eq!(g.get(id).data(), &[2.0, -4.0, 1.0]);
        assert_eq!(g.get(unused).data(), &[0.0]);
        assert_eq!(tape.backward(loss, &store), Err(Error::GraphConsumed));
    }

    #[test]
    fn layer_norm_examples() {
        let mut store = ParamStore::new();
        let gain = store.add("g", Matrix::filled(1, 2, 1.0));
        let shift = store.add("b", Matrix::zeros(1, 2));
        let mut tape = Tape::new();
        let x = tape.input(m(2, 2, &[1.0, -1.0, 4.0, 4.0]));
        let (g, b) = (tape.param(&store, gain), tape.param(&store, shift));
        let y = tape.layer_norm(x, g, b).unwrap();
        let expected = 1.0 / (1.0f64 + 1e-5).sqrt();
        let v = tape.value(y);
        assert!((v.get(0, 0) - expected).abs() < 1e-15);
        assert!((v.get(0, 1) + expected).abs() < 1e-15);
        assert_eq!(v.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn mse_examples() {
        let mut tape = Tape::new();
        let p = tape.input(m(2, 1, &[1.0, 1.0]));
        let l = tape.mse(p, &[0.0, 0.0]).unwrap();
        assert_eq!(tape.value(l).data(), &[1.0]);
        let p = tape.input(m(1, 1, &[4.0]));
        let l = tape.mse(p, &[1.0]).unwrap();
        assert_eq!(tape.value(l).data(), &[9.0]);
        let p = tape.input(m(2, 1, &[0.3, -0.2]));
        let l = tape.mse(p, &[0.3, -0.2]).unwrap();
        assert_eq!(tape.value(l).data(), &[0.0]);
        assert!(matches!(tape.mse(p, &[1.0]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let a = tape.input(Matrix::zeros(2, 3));
        let b = tape.input(Matrix::zeros(2, 3));
        assert!(tape.matmul(a, b).is_err());
        assert!(tape.add_bias(a, b).is_err());
        assert!(tape.gather_rows(a, &[2]).is_err());
        assert!(tape.scatter_add_rows(a, &[0], 4).is_err());
        assert!(tape.segment_mean(a, &[0, 0], 2).is_err());
    }

    #[test]
    fn non_finite_is_reported() {
        let mut tape = Tape::new();
        let a = tape.input(m(1, 1, &[f64::INFINITY]));
        let _ = tape.relu(a);
        assert_eq!(tape.check_finite(), Err(Error::NonFinite("input")));
    }
}
