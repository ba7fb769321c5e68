//! Reverse-mode differentiation over a small, fixed set of matrix primitives.
//!
//! Recording an operation on a [`Tape`] evaluates it immediately, so the tape
//! always holds the forward values of everything recorded so far. Calling
//! [`Tape::backward`] walks the record in reverse and accumulates adjoints
//! for every node that the output depends on.

use serde::{Deserialize, Serialize};

use super::tensor::{log_sum_exp, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    LeakyRelu,
    Sigmoid,
}

const LEAKY_SLOPE: f64 = 0.01;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" | "leakyrelu" | "leaky-relu" => Ok(Activation::LeakyRelu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::invalid(format!("unknown activation {other:?}"))),
        }
    }
}

/// Pairwise similarity between the rows of two matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairwiseKernel {
    /// `exp(-‖a - b‖² / (2θ²))`
    Rbf { theta: f64 },
    /// `a · b`
    InnerProduct,
    /// `(a · b + c)^degree`
    Polynomial { c: f64, degree: u32 },
}

impl PairwiseKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            PairwiseKernel::Rbf { theta } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-sq / (2.0 * theta * theta)).exp()
            }
            PairwiseKernel::InnerProduct => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            PairwiseKernel::Polynomial { c, degree } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (dot + c).powi(degree as i32)
            }
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · wᵀ`
    MatMulT(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Activate(Var, Activation),
    /// Hadamard product with a constant mask (dropout, feature masking).
    MaskConst(Var, Tensor),
    /// `(1 + ε)·h_v + Σ_{u ∈ N(v)} h_u`
    GinAggregate {
        h: Var,
        eps: Var,
        neighbors: Vec<Vec<usize>>,
    },
    /// Per-segment column sums; segment `s` spans rows `offsets[s]..offsets[s+1]`.
    SegmentSum(Var, Vec<usize>),
    Kernel(Var, Var, PairwiseKernel),
    ConcatRows(Var, Var),
    SliceRows(Var, usize),
    SoftmaxRows(Var),
    Sum(Var),
    CrossEntropy(Var, Vec<usize>),
    Entropy(Var),
    Combine(Var, f64, Var, f64),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::MatMulT(..) => "matmul_t",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Activate(..) => "activation",
            Op::MaskConst(..) => "mask",
            Op::GinAggregate { .. } => "gin_aggregate",
            Op::SegmentSum(..) => "segment_sum",
            Op::Kernel(..) => "kernel",
            Op::ConcatRows(..) => "concat_rows",
            Op::SliceRows(..) => "slice_rows",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::Sum(..) => "sum",
            Op::CrossEntropy(..) => "cross_entropy",
            Op::Entropy(..) => "entropy",
            Op::Combine(..) => "combine",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Ordered record of primitive operations and their forward values.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Adjoint of `var`, or `None` when the output does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Adjoint of `var`, zero-filled when the output does not depend on it.
    pub fn take_or_zeros(&mut self, var: Var, rows: usize, cols: usize) -> Tensor {
        self.grads
            .get_mut(var.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Tensor::zeros(rows, cols))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn check(&self, var: Var) -> Result<()> {
        if var.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::State(format!(
                "variable {} was not recorded on this tape",
                var.0
            )))
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite output from {}",
                op.name()
            )));
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let v = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), v)
    }

    /// `a · wᵀ`; `w` is stored output-major like a linear layer's weight.
    pub fn matmul_t(&mut self, a: Var, w: Var) -> Result<Var> {
        self.check(a)?;
        self.check(w)?;
        let v = self.value(a).matmul_t(self.value(w))?;
        self.push(Op::MatMulT(a, w), v)
    }

    /// Adds the `1 x cols` row `bias` to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        self.check(x)?;
        self.check(bias)?;
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + row {:?}", xv.shape(), bv.shape()),
            ));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bv.values()) {
                *o += b;
            }
        }
        self.push(Op::AddRow(x, bias), out)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape(
                "mul",
                format!("{:?} * {:?}", av.shape(), bv.shape()),
            ));
        }
        let values = av
            .values()
            .iter()
            .zip(bv.values())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::from_vec(av.rows(), av.cols(), values)?;
        self.push(Op::Mul(a, b), out)
    }

    pub fn activate(&mut self, x: Var, kind: Activation) -> Result<Var> {
        self.check(x)?;
        let out = self.value(x).map(|v| kind.apply(v));
        self.push(Op::Activate(x, kind), out)
    }

    /// Hadamard product with a constant mask of the same shape.
    pub fn mask(&mut self, x: Var, mask: Tensor) -> Result<Var> {
        self.check(x)?;
        let xv = self.value(x);
        if xv.shape() != mask.shape() {
            return Err(Error::shape(
                "mask",
                format!("{:?} vs {:?}", xv.shape(), mask.shape()),
            ));
        }
        let values = xv
            .values()
            .iter()
            .zip(mask.values())
            .map(|(a, m)| a * m)
            .collect();
        let out = Tensor::from_vec(xv.rows(), xv.cols(), values)?;
        self.push(Op::MaskConst(x, mask), out)
    }

    /// GIN neighbourhood aggregation over `neighbors` (symmetric adjacency lists).
    pub fn gin_aggregate(&mut self, h: Var, eps: Var, neighbors: Vec<Vec<usize>>) -> Result<Var> {
        self.check(h)?;
        self.check(eps)?;
        let hv = self.value(h);
        let ev = self.value(eps);
        if neighbors.len() != hv.rows() || ev.shape() != (1, 1) {
            return Err(Error::shape(
                "gin_aggregate",
                format!(
                    "{} adjacency rows, h {:?}, eps {:?}",
                    neighbors.len(),
                    hv.shape(),
                    ev.shape()
                ),
            ));
        }
        let scale = 1.0 + ev.values()[0];
        let mut out = hv.map(|v| v * scale);
        for (v, nbrs) in neighbors.iter().enumerate() {
            for &u in nbrs {
                if u >= hv.rows() {
                    return Err(Error::shape(
                        "gin_aggregate",
                        format!("neighbor {u} out of range"),
                    ));
                }
                let src = hv.row(u);
                for (o, s) in out.row_mut(v).iter_mut().zip(src) {
                    *o += s;
                }
            }
        }
        self.push(Op::GinAggregate { h, eps, neighbors }, out)
    }

    /// Column sums over consecutive row segments given by `offsets`.
    pub fn segment_sum(&mut self, x: Var, offsets: Vec<usize>) -> Result<Var> {
        self.check(x)?;
        let xv = self.value(x);
        let ok = offsets.first() == Some(&0)
            && offsets.last() == Some(&xv.rows())
            && offsets.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::shape(
                "segment_sum",
                format!("offsets must rise strictly from 0 to {}", xv.rows()),
            ));
        }
        let mut out = Tensor::zeros(offsets.len() - 1, xv.cols());
        for (s, w) in offsets.windows(2).enumerate() {
            for r in w[0]..w[1] {
                for (o, v) in out.row_mut(s).iter_mut().zip(xv.row(r)) {
                    *o += v;
                }
            }
        }
        self.push(Op::SegmentSum(x, offsets), out)
    }

    /// Matrix of `kernel(a_i, b_j)` over all row pairs.
    pub fn kernel(&mut self, a: Var, b: Var, kernel: PairwiseKernel) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(Error::shape(
                "kernel",
                format!("dims {} vs {}", av.cols(), bv.cols()),
            ));
        }
        let out = kernel_matrix(av, bv, kernel);
        self.push(Op::Kernel(a, b, kernel), out)
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(Error::shape(
                "concat_rows",
                format!("{:?} over {:?}", av.shape(), bv.shape()),
            ));
        }
        let mut values = av.values().to_vec();
        values.extend_from_slice(bv.values());
        let out = Tensor::from_vec(av.rows() + bv.rows(), av.cols(), values)?;
        self.push(Op::ConcatRows(a, b), out)
    }

    /// Rows `start..end` of `x`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        self.check(x)?;
        let xv = self.value(x);
        if start > end || end > xv.rows() {
            return Err(Error::shape(
                "slice_rows",
                format!("{start}..{end} of {} rows", xv.rows()),
            ));
        }
        let c = xv.cols();
        let out = Tensor::from_vec(end - start, c, xv.values()[start * c..end * c].to_vec())?;
        self.push(Op::SliceRows(x, start), out)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let out = self.value(x).softmax_rows();
        self.push(Op::SoftmaxRows(x), out)
    }

    /// Sum of all entries as a 1x1 tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let total = self.value(x).values().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(total))
    }

    /// Mean over rows of `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        self.check(logits)?;
        let lv = self.value(logits);
        if labels.is_empty() || labels.len() != lv.rows() {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} labels for {} rows", labels.len(), lv.rows()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= lv.cols()) {
            return Err(Error::invalid(format!(
                "label {bad} >= {} classes",
                lv.cols()
            )));
        }
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(r, &y)| log_sum_exp(lv.row(r)) - lv.get(r, y))
            .sum();
        let out = Tensor::scalar(total / labels.len() as f64);
        self.push(Op::CrossEntropy(logits, labels.to_vec()), out)
    }

    /// `-(1/C) Σ_rows Σ_i p_i log p_i` with `p = softmax(row)` and `C = cols`.
    pub fn entropy(&mut self, logits: Var) -> Result<Var> {
        self.check(logits)?;
        let lv = self.value(logits);
        if lv.cols() == 0 {
            return Err(Error::shape("entropy", "zero classes"));
        }
        let logp = lv.log_softmax_rows();
        let total: f64 = logp.values().iter().map(|&l| -l.exp() * l).sum();
        let out = Tensor::scalar(total / lv.cols() as f64);
        self.push(Op::Entropy(logits), out)
    }

    /// `ca·a + cb·b` for two scalars.
    pub fn combine(&mut self, a: Var, ca: f64, b: Var, cb: f64) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (x, y) = match (self.value(a).item(), self.value(b).item()) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(Error::shape("combine", "operands must be 1x1")),
        };
        self.push(Op::Combine(a, ca, b, cb), Tensor::scalar(ca * x + cb * y))
    }

    /// Backpropagates from a scalar output with unit seed.
    pub fn backward_scalar(&self, output: Var) -> Result<Gradients> {
        self.check(output)?;
        if self.value(output).shape() != (1, 1) {
            return Err(Error::shape("backward", "output is not a scalar"));
        }
        self.backward(output, Tensor::scalar(1.0))
    }

    /// Backpropagates `seed` (the adjoint of `output`) through the record.
    pub fn backward(&self, output: Var, seed: Tensor) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward on an empty tape".into()));
        }
        self.check(output)?;
        if seed.shape() != self.value(output).shape() {
            return Err(Error::shape(
                "backward",
                format!(
                    "seed {:?} for output {:?}",
                    seed.shape(),
                    self.value(output).shape()
                ),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(&node.op, &node.value, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(
        &self,
        op: &Op,
        out: &Tensor,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ga = g.matmul_t(self.value(b))?;
                let gb = self.value(a).t_matmul(g)?;
                accumulate(grads, a, ga)?;
                accumulate(grads, b, gb)?;
            }
            Op::MatMulT(a, w) => {
                let ga = g.matmul(self.value(w))?;
                let gw = g.t_matmul(self.value(a))?;
                accumulate(grads, a, ga)?;
                accumulate(grads, w, gw)?;
            }
            Op::AddRow(x, bias) => {
                let mut gb = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, v) in gb.values_mut().iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                accumulate(grads, x, g.clone())?;
                accumulate(grads, bias, gb)?;
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(a), self.value(b));
                let ga = zip_map(g, bv, |gi, bi| gi * bi);
                let gb = zip_map(g, av, |gi, ai| gi * ai);
                accumulate(grads, a, ga)?;
                accumulate(grads, b, gb)?;
            }
            Op::Activate(x, kind) => {
                let xv = self.value(x);
                let values = g
                    .values()
                    .iter()
                    .zip(xv.values())
                    .zip(out.values())
                    .map(|((gi, &xi), &yi)| gi * kind.derivative(xi, yi))
                    .collect();
                accumulate(grads, x, Tensor::from_vec(g.rows(), g.cols(), values)?)?;
            }
            Op::MaskConst(x, ref mask) => {
                accumulate(grads, x, zip_map(g, mask, |gi, mi| gi * mi))?;
            }
            Op::GinAggregate {
                h,
                eps,
                ref neighbors,
            } => {
                let hv = self.value(h);
                let scale = 1.0 + self.value(eps).values()[0];
                let mut gh = g.map(|v| v * scale);
                for (v, nbrs) in neighbors.iter().enumerate() {
                    for &u in nbrs {
                        let src = g.row(v).to_vec();
                        for (o, s) in gh.row_mut(u).iter_mut().zip(&src) {
                            *o += s;
                        }
                    }
                }
                let geps: f64 = hv.values().iter().zip(g.values()).map(|(a, b)| a * b).sum();
                accumulate(grads, h, gh)?;
                accumulate(grads, eps, Tensor::scalar(geps))?;
            }
            Op::SegmentSum(x, ref offsets) => {
                let xv = self.value(x);
                let mut gx = Tensor::zeros(xv.rows(), xv.cols());
                for (s, w) in offsets.windows(2).enumerate() {
                    for r in w[0]..w[1] {
                        gx.row_mut(r).copy_from_slice(g.row(s));
                    }
                }
                accumulate(grads, x, gx)?;
            }
            Op::Kernel(a, b, kernel) => {
                let (ga, gb) = kernel_backward(self.value(a), self.value(b), out, g, kernel)?;
                accumulate(grads, a, ga)?;
                accumulate(grads, b, gb)?;
            }
            Op::ConcatRows(a, b) => {
                let (ar, c) = (self.value(a).rows(), g.cols());
                let top = Tensor::from_vec(ar, c, g.values()[..ar * c].to_vec())?;
                let bottom = Tensor::from_vec(g.rows() - ar, c, g.values()[ar * c..].to_vec())?;
                accumulate(grads, a, top)?;
                accumulate(grads, b, bottom)?;
            }
            Op::SliceRows(x, start) => {
                let xv = self.value(x);
                let c = xv.cols();
                let mut gx = Tensor::zeros(xv.rows(), c);
                gx.values_mut()[start * c..(start + g.rows()) * c].copy_from_slice(g.values());
                accumulate(grads, x, gx)?;
            }
            Op::SoftmaxRows(x) => {
                let mut gx = out.clone();
                for r in 0..out.rows() {
                    let dot: f64 = g.row(r).iter().zip(out.row(r)).map(|(a, b)| a * b).sum();
                    for (o, gi) in gx.row_mut(r).iter_mut().zip(g.row(r)) {
                        *o *= gi - dot;
                    }
                }
                accumulate(grads, x, gx)?;
            }
            Op::Sum(x) => {
                let xv = self.value(x);
                accumulate(
                    grads,
                    x,
                    Tensor::filled(xv.rows(), xv.cols(), g.values()[0]),
                )?;
            }
            Op::CrossEntropy(logits, ref labels) => {
                let lv = self.value(logits);
                let scale = g.values()[0] / labels.len() as f64;
                let mut gl = lv.softmax_rows();
                for (r, &y) in labels.iter().enumerate() {
                    let row = gl.row_mut(r);
                    row[y] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= scale);
                }
                accumulate(grads, logits, gl)?;
            }
            Op::Entropy(logits) => {
                let lv = self.value(logits);
                let scale = g.values()[0] / lv.cols() as f64;
                let logp = lv.log_softmax_rows();
                let mut gl = Tensor::zeros(lv.rows(), lv.cols());
                for r in 0..lv.rows() {
                    let lp = logp.row(r);
                    let h: f64 = lp.iter().map(|&l| -l.exp() * l).sum();
                    for (o, &l) in gl.row_mut(r).iter_mut().zip(lp) {
                        *o = -scale * l.exp() * (l + h);
                    }
                }
                accumulate(grads, logits, gl)?;
            }
            Op::Combine(a, ca, b, cb) => {
                let gv = g.values()[0];
                accumulate(grads, a, Tensor::scalar(ca * gv))?;
                accumulate(grads, b, Tensor::scalar(cb * gv))?;
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) -> Result<()> {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_vec(a.rows(), a.cols(), values).expect("shapes checked at record time")
}

/// Dense kernel matrix between the rows of `a` and the rows of `b`.
pub fn kernel_matrix(a: &Tensor, b: &Tensor, kernel: PairwiseKernel) -> Tensor {
    match kernel {
        PairwiseKernel::InnerProduct => a.matmul_t(b).expect("dims checked"),
        PairwiseKernel::Polynomial { c, degree } => a
            .matmul_t(b)
            .expect("dims checked")
            .map(|s| (s + c).powi(degree as i32)),
        PairwiseKernel::Rbf { .. } => {
            let mut out = Tensor::zeros(a.rows(), b.rows());
            for i in 0..a.rows() {
                let ai = a.row(i);
                for j in 0..b.rows() {
                    out.set(i, j, kernel.eval(ai, b.row(j)));
                }
            }
            out
        }
    }
}

fn kernel_backward(
    a: &Tensor,
    b: &Tensor,
    out: &Tensor,
    g: &Tensor,
    kernel: PairwiseKernel,
) -> Result<(Tensor, Tensor)> {
    match kernel {
        PairwiseKernel::InnerProduct => Ok((g.matmul(b)?, g.t_matmul(a)?)),
        PairwiseKernel::Polynomial { c, degree } => {
            let s = a.matmul_t(b)?;
            let d = degree as f64;
            let inner = zip_map(g, &s, |gi, si| gi * d * (si + c).powi(degree as i32 - 1));
            Ok((inner.matmul(b)?, inner.t_matmul(a)?))
        }
        PairwiseKernel::Rbf { theta } => {
            let inv = 1.0 / (theta * theta);
            let mut ga = Tensor::zeros(a.rows(), a.cols());
            let mut gb = Tensor::zeros(b.rows(), b.cols());
            for i in 0..a.rows() {
                for j in 0..b.rows() {
                    let w = g.get(i, j) * out.get(i, j) * inv;
                    if w == 0.0 {
                        continue;
                    }
                    for k in 0..a.cols() {
                        let diff = a.get(i, k) - b.get(j, k);
                        ga.values_mut()[i * a.cols() + k] -= w * diff;
                        gb.values_mut()[j * b.cols() + k] += w * diff;
                    }
                }
            }
            Ok((ga, gb))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward_scalar(y).unwrap();
        assert_eq!(g.get(x).unwrap().values(), &[6.0]);
    }

    #[test]
    fn linear_map_gradient() {
        let mut tape = Tape::new();
        let w = tape.leaf(t(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let v = tape.leaf(t(&[vec![1.0], vec![1.0]]));
        let wv = tape.matmul(w, v).unwrap();
        assert_eq!(tape.value(wv).values(), &[3.0, 7.0]);
        let s = tape.sum(wv).unwrap();
        let g = tape.backward_scalar(s).unwrap();
        assert_eq!(g.get(w).unwrap().values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn relu_and_softmax_forward() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[vec![-1.0, 0.0, 2.0]]));
        let r = tape.activate(x, Activation::Relu).unwrap();
        assert_eq!(tape.value(r).values(), &[0.0, 0.0, 2.0]);
        let z = tape.leaf(t(&[vec![0.0, 0.0]]));
        let s = tape.softmax_rows(z).unwrap();
        assert_eq!(tape.value(s).values(), &[0.5, 0.5]);
    }

    #[test]
    fn backward_rejects_foreign_var_and_bad_seed() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(2, 2));
        assert!(matches!(
            tape.backward(Var(7), Tensor::scalar(1.0)),
            Err(Error::State(_))
        ));
        assert!(tape.backward(x, Tensor::scalar(1.0)).is_err());
        assert!(matches!(
            Tape::new().backward(Var(0), Tensor::scalar(1.0)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn shape_mismatch_names_primitive() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 3));
        let err = tape.matmul(a, a).unwrap_err();
        assert!(err.to_string().contains("matmul"));
        let b = tape.leaf(Tensor::zeros(1, 2));
        assert!(tape
            .add_row(a, b)
            .unwrap_err()
            .to_string()
            .contains("add_row"));
    }

    #[test]
    fn gin_aggregate_triangle() {
        let mut tape = Tape::new();
        let h = tape.leaf(Tensor::filled(3, 1, 1.0));
        let eps = tape.leaf(Tensor::scalar(0.0));
        let nbrs = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        let out = tape.gin_aggregate(h, eps, nbrs).unwrap();
        assert_eq!(tape.value(out).values(), &[3.0, 3.0, 3.0]);
    }

    #[test]
    fn entropy_known_values() {
        let mut tape = Tape::new();
        let uniform = tape.leaf(Tensor::zeros(2, 2));
        let e = tape.entropy(uniform).unwrap();
        assert!((tape.value(e).values()[0] - std::f64::consts::LN_2).abs() < 1e-12);
        let sharp = tape.leaf(t(&[vec![800.0, -800.0]]));
        let e = tape.entropy(sharp).unwrap();
        assert_eq!(tape.value(e).values()[0], 0.0);
    }

    #[test]
    fn cross_entropy_known_values() {
        let mut tape = Tape::new();
        let l = tape.leaf(t(&[vec![20.0, -20.0], vec![0.0, 0.0]]));
        let ce = tape.cross_entropy(l, &[0, 1]).unwrap();
        let v = tape.value(ce).values()[0];
        assert!((v - std::f64::consts::LN_2 / 2.0).abs() < 1e-9);
        assert!(tape.cross_entropy(l, &[]).is_err());
        assert!(tape.cross_entropy(l, &[0, 2]).is_err());
    }

    #[test]
    fn shared_operand_accumulates() {
        // kernel(z, z) with z used on both sides.
        let mut tape = Tape::new();
        let z = tape.leaf(t(&[vec![0.3, -0.1], vec![0.5, 0.2]]));
        let k = tape
            .kernel(z, z, PairwiseKernel::Rbf { theta: 1.0 })
            .unwrap();
        let s = tape.sum(k).unwrap();
        let g = tape.backward_scalar(s).unwrap();
        // symmetric pair contributions cancel out per row
        let gz = g.get(z).unwrap();
        assert!((gz.get(0, 0) + gz.get(1, 0)).abs() < 1e-12);
    }
}
