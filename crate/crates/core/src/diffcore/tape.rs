//! Reverse-mode gradient tape for scalar-valued computations.
//!
//! Every operation records its primal result; `backward` replays the tape in
//! reverse to accumulate exact gradients of one scalar output with respect to
//! any recorded leaf. Shape mismatches and non-finite intermediates poison the
//! tape: subsequent operations become no-ops and the first error is reported
//! when the value or gradient is queried.

use crate::diffcore::array::{RealMatrix, RealVector};
use crate::error::{Error, Result};

/// Handle to a recorded node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match self {
            Shape::Vector(n) => *n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Shape::Vector(1))
    }

    fn describe(&self) -> String {
        match self {
            Shape::Vector(n) => format!("vector[{n}]"),
            Shape::Matrix(r, c) => format!("matrix[{r}x{c}]"),
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatVec(Var, Var),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    ClampMin(Var, f64),
    Softmax(Var),
    LogSoftmax(Var),
    L2Normalize(Var),
    Sum(Var),
    Dot(Var, Var),
    Slice { src: Var, offset: usize },
    LogSumExp(Vec<Var>),
    MeanOf(Vec<Var>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::MatVec(..) => "matvec",
            Op::Relu(..) => "relu",
            Op::Tanh(..) => "tanh",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Sqrt(..) => "sqrt",
            Op::ClampMin(..) => "clamp_min",
            Op::Softmax(..) => "softmax",
            Op::LogSoftmax(..) => "log_softmax",
            Op::L2Normalize(..) => "l2_normalize",
            Op::Sum(..) => "sum",
            Op::Dot(..) => "dot",
            Op::Slice { .. } => "slice",
            Op::LogSumExp(..) => "log_sum_exp",
            Op::MeanOf(..) => "mean_of",
        }
    }
}

struct Node {
    op: Op,
    value: Vec<f64>,
    shape: Shape,
    needs_grad: bool,
}

/// Gradients of one scalar output, indexed by `Var`.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the recorded scalar with respect to `v`, or `None` if `v`
    /// does not influence it.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Like `get`, but materializes an explicit zero gradient.
    pub fn take(&mut self, v: Var, len: usize) -> Vec<f64> {
        self.grads[v.0].take().unwrap_or_else(|| vec![0.0; len])
    }
}

pub struct Tape {
    nodes: Vec<Node>,
    poisoned: Option<Error>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        // Node 0 is the sink returned by operations after the tape poisons.
        Tape {
            nodes: vec![Node {
                op: Op::Leaf,
                value: vec![0.0],
                shape: Shape::Vector(1),
                needs_grad: false,
            }],
            poisoned: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn poison(&mut self, err: Error) -> Var {
        if self.poisoned.is_none() {
            self.poisoned = Some(err);
        }
        Var(0)
    }

    fn push(&mut self, op: Op, value: Vec<f64>, shape: Shape, needs_grad: bool) -> Var {
        if value.iter().any(|v| !v.is_finite()) {
            return self.poison(Error::NonFinite { op: op.name() });
        }
        debug_assert_eq!(value.len(), shape.len());
        let idx = self.nodes.len();
        self.nodes.push(Node {
            op,
            value,
            shape,
            needs_grad,
        });
        Var(idx)
    }

    fn val(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    fn expect_same_shape(&mut self, op: &'static str, a: Var, b: Var) -> bool {
        let (sa, sb) = (self.nodes[a.0].shape, self.nodes[b.0].shape);
        if sa != sb {
            self.poison(Error::ShapeMismatch {
                op,
                expected: sa.describe(),
                got: sb.describe(),
            });
            return false;
        }
        true
    }

    // ----- leaves -----

    /// Records a differentiable vector leaf.
    pub fn leaf(&mut self, v: &RealVector) -> Var {
        self.leaf_slice(v.as_slice())
    }

    pub fn leaf_slice(&mut self, v: &[f64]) -> Var {
        let shape = Shape::Vector(v.len());
        self.push(Op::Leaf, v.to_vec(), shape, true)
    }

    /// Records a non-differentiable vector leaf.
    pub fn constant(&mut self, v: &[f64]) -> Var {
        let shape = Shape::Vector(v.len());
        self.push(Op::Leaf, v.to_vec(), shape, false)
    }

    pub fn constant_scalar(&mut self, v: f64) -> Var {
        self.push(Op::Leaf, vec![v], Shape::Vector(1), false)
    }

    pub fn leaf_matrix(&mut self, m: &RealMatrix, needs_grad: bool) -> Var {
        let shape = Shape::Matrix(m.rows(), m.cols());
        self.push(Op::Leaf, m.as_slice().to_vec(), shape, needs_grad)
    }

    // ----- elementwise binary -----

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        if self.poisoned.is_some() || !self.expect_same_shape("add", a, b) {
            return Var(0);
        }
        let value: Vec<f64> = self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| x + y)
            .collect();
        let (shape, needs) = (self.shape(a), self.ng(a) || self.ng(b));
        self.push(Op::Add(a, b), value, shape, needs)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        if self.poisoned.is_some() || !self.expect_same_shape("sub", a, b) {
            return Var(0);
        }
        let value: Vec<f64> = self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| x - y)
            .collect();
        let (shape, needs) = (self.shape(a), self.ng(a) || self.ng(b));
        self.push(Op::Sub(a, b), value, shape, needs)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        if self.poisoned.is_some() || !self.expect_same_shape("mul", a, b) {
            return Var(0);
        }
        let value: Vec<f64> = self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| x * y)
            .collect();
        let (shape, needs) = (self.shape(a), self.ng(a) || self.ng(b));
        self.push(Op::Mul(a, b), value, shape, needs)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        if self.poisoned.is_some() || !self.expect_same_shape("div", a, b) {
            return Var(0);
        }
        let value: Vec<f64> = self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| x / y)
            .collect();
        let (shape, needs) = (self.shape(a), self.ng(a) || self.ng(b));
        self.push(Op::Div(a, b), value, shape, needs)
    }

    // ----- elementwise unary -----

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a), |x| -x)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), |x| x.tanh())
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), |x| x.exp())
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), |x| x.ln())
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sqrt(a), |x| x.sqrt())
    }

    pub fn clamp_min(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::ClampMin(a, c), |x| x.max(c))
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        let value: Vec<f64> = self.val(a).iter().map(|x| f(*x)).collect();
        let (shape, needs) = (self.shape(a), self.ng(a));
        self.push(op, value, shape, needs)
    }

    // ----- structured ops -----

    /// `W x` for a matrix node `w` and vector node `x`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        let (rows, cols) = match self.shape(w) {
            Shape::Matrix(r, c) => (r, c),
            s => {
                return self.poison(Error::ShapeMismatch {
                    op: "matvec",
                    expected: "matrix".into(),
                    got: s.describe(),
                })
            }
        };
        match self.shape(x) {
            Shape::Vector(n) if n == cols => {}
            s => {
                return self.poison(Error::ShapeMismatch {
                    op: "matvec",
                    expected: format!("vector[{cols}]"),
                    got: s.describe(),
                })
            }
        }
        let mut value = vec![0.0; rows];
        {
            let wv = self.val(w);
            let xv = self.val(x);
            for r in 0..rows {
                let mut acc = 0.0;
                for c in 0..cols {
                    acc += wv[r * cols + c] * xv[c];
                }
                value[r] = acc;
            }
        }
        let needs = self.ng(w) || self.ng(x);
        self.push(Op::MatVec(w, x), value, Shape::Vector(rows), needs)
    }

    /// Numerically stable softmax over a vector.
    pub fn softmax(&mut self, a: Var) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        let value = stable_softmax(self.val(a));
        let (shape, needs) = (self.shape(a), self.ng(a));
        self.push(Op::Softmax(a), value, shape, needs)
    }

    /// Numerically stable log-softmax over a vector.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        let x = self.val(a);
        let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let value: Vec<f64> = x.iter().map(|v| v - lse).collect();
        let (shape, needs) = (self.shape(a), self.ng(a));
        self.push(Op::LogSoftmax(a), value, shape, needs)
    }

    /// `x / |x|`. Poisons the tape on a zero input vector.
    pub fn l2_normalize(&mut self, a: Var) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        let x = self.val(a);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let value: Vec<f64> = x.iter().map(|v| v / norm).collect();
        let (shape, needs) = (self.shape(a), self.ng(a));
        self.push(Op::L2Normalize(a), value, shape, needs)
    }

    /// Sum of all entries, as a scalar node.
    pub fn sum(&mut self, a: Var) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        let value = vec![self.val(a).iter().sum::<f64>()];
        let needs = self.ng(a);
        self.push(Op::Sum(a), value, Shape::Vector(1), needs)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        if self.poisoned.is_some() || !self.expect_same_shape("dot", a, b) {
            return Var(0);
        }
        let value = vec![self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| x * y)
            .sum::<f64>()];
        let needs = self.ng(a) || self.ng(b);
        self.push(Op::Dot(a, b), value, Shape::Vector(1), needs)
    }

    /// A contiguous sub-vector `[offset, offset + len)` of a vector node.
    pub fn slice(&mut self, src: Var, offset: usize, len: usize) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        let total = self.shape(src).len();
        if offset + len > total {
            return self.poison(Error::ShapeMismatch {
                op: "slice",
                expected: format!("offset+len <= {total}"),
                got: format!("{offset}+{len}"),
            });
        }
        let value = self.val(src)[offset..offset + len].to_vec();
        let needs = self.ng(src);
        self.push(Op::Slice { src, offset }, value, Shape::Vector(len), needs)
    }

    /// `log(sum_i exp(t_i))` over scalar nodes, computed stably.
    pub fn log_sum_exp(&mut self, terms: &[Var]) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        if terms.is_empty() {
            return self.poison(Error::EmptyInput { op: "log_sum_exp" });
        }
        for &t in terms {
            if !self.shape(t).is_scalar() {
                return self.poison(Error::ShapeMismatch {
                    op: "log_sum_exp",
                    expected: "scalar terms".into(),
                    got: self.shape(t).describe(),
                });
            }
        }
        let xs: Vec<f64> = terms.iter().map(|t| self.val(*t)[0]).collect();
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let value = vec![m + xs.iter().map(|v| (v - m).exp()).sum::<f64>().ln()];
        let needs = terms.iter().any(|t| self.ng(*t));
        self.push(
            Op::LogSumExp(terms.to_vec()),
            value,
            Shape::Vector(1),
            needs,
        )
    }

    /// Arithmetic mean of scalar nodes.
    pub fn mean_of(&mut self, terms: &[Var]) -> Var {
        if self.poisoned.is_some() {
            return Var(0);
        }
        if terms.is_empty() {
            return self.poison(Error::EmptyInput { op: "mean_of" });
        }
        for &t in terms {
            if !self.shape(t).is_scalar() {
                return self.poison(Error::ShapeMismatch {
                    op: "mean_of",
                    expected: "scalar terms".into(),
                    got: self.shape(t).describe(),
                });
            }
        }
        let value = vec![terms.iter().map(|t| self.val(*t)[0]).sum::<f64>() / terms.len() as f64];
        let needs = terms.iter().any(|t| self.ng(*t));
        self.push(Op::MeanOf(terms.to_vec()), value, Shape::Vector(1), needs)
    }

    // ----- queries -----

    pub fn value(&self, v: Var) -> Result<&[f64]> {
        if let Some(err) = &self.poisoned {
            return Err(err.clone());
        }
        Ok(self.val(v))
    }

    pub fn value_scalar(&self, v: Var) -> Result<f64> {
        let vals = self.value(v)?;
        if vals.len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "value_scalar",
                expected: "scalar".into(),
                got: self.shape(v).describe(),
            });
        }
        Ok(vals[0])
    }

    /// Reverse pass from a scalar output node.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        if let Some(err) = &self.poisoned {
            return Err(err.clone());
        }
        if !self.shape(out).is_scalar() {
            return Err(Error::ShapeMismatch {
                op: "backward",
                expected: "scalar output".into(),
                got: self.shape(out).describe(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(vec![1.0]);

        for i in (0..=out.0).rev() {
            if !self.nodes[i].needs_grad && !matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let add_into = |grads: &mut [Option<Vec<f64>>], v: Var, contrib: &dyn Fn(&mut [f64])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let slot =
                grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].shape.len()]);
            contrib(slot);
        };

        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                add_into(grads, *a, &|ga| {
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                });
                add_into(grads, *b, &|gb| {
                    for (x, y) in gb.iter_mut().zip(g) {
                        *x += y;
                    }
                });
            }
            Op::Sub(a, b) => {
                add_into(grads, *a, &|ga| {
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                });
                add_into(grads, *b, &|gb| {
                    for (x, y) in gb.iter_mut().zip(g) {
                        *x -= y;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] * bv[k];
                    }
                });
                add_into(grads, *b, &|gb| {
                    for k in 0..gb.len() {
                        gb[k] += g[k] * av[k];
                    }
                });
            }
            Op::Div(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] / bv[k];
                    }
                });
                add_into(grads, *b, &|gb| {
                    for k in 0..gb.len() {
                        gb[k] -= g[k] * av[k] / (bv[k] * bv[k]);
                    }
                });
            }
            Op::Neg(a) => add_into(grads, *a, &|ga| {
                for (x, y) in ga.iter_mut().zip(g) {
                    *x -= y;
                }
            }),
            Op::Scale(a, c) => add_into(grads, *a, &|ga| {
                for (x, y) in ga.iter_mut().zip(g) {
                    *x += c * y;
                }
            }),
            Op::AddScalar(a) => add_into(grads, *a, &|ga| {
                for (x, y) in ga.iter_mut().zip(g) {
                    *x += y;
                }
            }),
            Op::MatVec(w, x) => {
                let (rows, cols) = match self.nodes[w.0].shape {
                    Shape::Matrix(r, c) => (r, c),
                    _ => unreachable!(),
                };
                let (wv, xv) = (self.val(*w), self.val(*x));
                add_into(grads, *w, &|gw| {
                    for r in 0..rows {
                        for c in 0..cols {
                            gw[r * cols + c] += g[r] * xv[c];
                        }
                    }
                });
                add_into(grads, *x, &|gx| {
                    for c in 0..cols {
                        let mut acc = 0.0;
                        for r in 0..rows {
                            acc += wv[r * cols + c] * g[r];
                        }
                        gx[c] += acc;
                    }
                });
            }
            Op::Relu(a) => {
                let av = self.val(*a);
                // Subgradient at 0 is fixed to 0.
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        if av[k] > 0.0 {
                            ga[k] += g[k];
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let yv = &node.value;
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] * (1.0 - yv[k] * yv[k]);
                    }
                });
            }
            Op::Exp(a) => {
                let yv = &node.value;
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] * yv[k];
                    }
                });
            }
            Op::Log(a) => {
                let av = self.val(*a);
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] / av[k];
                    }
                });
            }
            Op::Sqrt(a) => {
                let yv = &node.value;
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] / (2.0 * yv[k]);
                    }
                });
            }
            Op::ClampMin(a, c) => {
                let av = self.val(*a);
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        if av[k] > *c {
                            ga[k] += g[k];
                        }
                    }
                });
            }
            Op::Softmax(a) => {
                let yv = &node.value;
                let gy: f64 = g.iter().zip(yv).map(|(gi, yi)| gi * yi).sum();
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += yv[k] * (g[k] - gy);
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let yv = &node.value;
                let gsum: f64 = g.iter().sum();
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] - yv[k].exp() * gsum;
                    }
                });
            }
            Op::L2Normalize(a) => {
                let av = self.val(*a);
                let yv = &node.value;
                let norm = av.iter().map(|v| v * v).sum::<f64>().sqrt();
                let gy: f64 = g.iter().zip(yv).map(|(gi, yi)| gi * yi).sum();
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += (g[k] - yv[k] * gy) / norm;
                    }
                });
            }
            Op::Sum(a) => add_into(grads, *a, &|ga| {
                for x in ga.iter_mut() {
                    *x += g[0];
                }
            }),
            Op::Dot(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                add_into(grads, *a, &|ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[0] * bv[k];
                    }
                });
                add_into(grads, *b, &|gb| {
                    for k in 0..gb.len() {
                        gb[k] += g[0] * av[k];
                    }
                });
            }
            Op::Slice { src, offset } => {
                let len = node.value.len();
                add_into(grads, *src, &|gs| {
                    for k in 0..len {
                        gs[offset + k] += g[k];
                    }
                });
            }
            Op::LogSumExp(terms) => {
                let y = node.value[0];
                for t in terms {
                    let w = (self.val(*t)[0] - y).exp();
                    add_into(grads, *t, &|gt| {
                        gt[0] += g[0] * w;
                    });
                }
            }
            Op::MeanOf(terms) => {
                let n = terms.len() as f64;
                for t in terms {
                    add_into(grads, *t, &|gt| {
                        gt[0] += g[0] / n;
                    });
                }
            }
        }
    }
}

pub(crate) fn stable_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Records `f` on a fresh tape with `at` as a differentiable leaf and returns
/// the scalar value together with its gradient at `at`.
pub fn grad_scalar<F>(f: F, at: &RealVector) -> Result<(f64, RealVector)>
where
    F: FnOnce(&mut Tape, Var) -> Var,
{
    let mut tape = Tape::new();
    let z = tape.leaf(at);
    let out = f(&mut tape, z);
    let value = tape.value_scalar(out)?;
    let mut grads = tape.backward(out)?;
    Ok((value, RealVector::new(grads.take(z, at.len()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::finite_diff_grad;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        diff / scale.max(1e-8)
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        let at = RealVector::from_slice(&[3.0, 4.0]);
        let (value, grad) = grad_scalar(
            |t, z| {
                let sq = t.dot(z, z);
                t.scale(sq, 0.5)
            },
            &at,
        )
        .unwrap();
        assert_eq!(value, 12.5);
        assert_eq!(grad.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let at = RealVector::from_slice(&[1.0, -2.0, 0.3]);
        let (value, grad) = grad_scalar(|t, _z| t.constant_scalar(7.25), &at).unwrap();
        assert_eq!(value, 7.25);
        assert_eq!(grad.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_log_and_lse_match_finite_differences() {
        let at = RealVector::from_slice(&[0.3, -1.2, 0.7, 0.1]);
        let build = |t: &mut Tape, z: Var| {
            let s = t.softmax(z);
            let c = t.constant(&[0.1, 0.2, 0.3, 0.4]);
            let picked = t.mul(s, c);
            let total = t.sum(picked);
            let ls = t.log_softmax(z);
            let first = t.slice(ls, 0, 1);
            let both = t.add(total, first);
            let terms: Vec<Var> = (0..4).map(|k| t.slice(z, k, 1)).collect();
            let lse = t.log_sum_exp(&terms);
            t.add(both, lse)
        };
        let (_, grad) = grad_scalar(build, &at).unwrap();
        let fd = finite_diff_grad(
            |x| {
                let mut t = Tape::new();
                let z = t.leaf_slice(x);
                let out = build(&mut t, z);
                t.value_scalar(out).unwrap()
            },
            at.as_slice(),
            1e-5,
        )
        .unwrap();
        assert!(rel_err(grad.as_slice(), &fd) < 1e-6);
    }

    #[test]
    fn l2_normalize_matches_finite_differences() {
        let at = RealVector::from_slice(&[0.5, -0.8, 1.1]);
        let build = |t: &mut Tape, z: Var| {
            let y = t.l2_normalize(z);
            let c = t.constant(&[1.0, 2.0, -0.5]);
            t.dot(y, c)
        };
        let (_, grad) = grad_scalar(build, &at).unwrap();
        let fd = finite_diff_grad(
            |x| {
                let mut t = Tape::new();
                let z = t.leaf_slice(x);
                let out = build(&mut t, z);
                t.value_scalar(out).unwrap()
            },
            at.as_slice(),
            1e-6,
        )
        .unwrap();
        assert!(rel_err(grad.as_slice(), &fd) < 1e-6);
    }

    #[test]
    fn matvec_gradients_flow_to_both_operands() {
        let w = RealMatrix::new(2, 3, vec![0.2, -0.4, 1.0, 0.7, 0.1, -0.3]).unwrap();
        let x = RealVector::from_slice(&[1.0, 2.0, -1.0]);
        let mut tape = Tape::new();
        let wv = tape.leaf_matrix(&w, true);
        let xv = tape.leaf(&x);
        let y = tape.matvec(wv, xv);
        let s = tape.sum(y);
        let grads = tape.backward(s).unwrap();
        // d(sum Wx)/dW = ones ⊗ x, d/dx = column sums of W.
        assert_eq!(
            grads.get(wv).unwrap(),
            &[1.0, 2.0, -1.0, 1.0, 2.0, -1.0][..]
        );
        let gx = grads.get(xv).unwrap();
        assert!((gx[0] - 0.9).abs() < 1e-15);
        assert!((gx[1] + 0.3).abs() < 1e-15);
        assert!((gx[2] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_poisons_tape() {
        let mut tape = Tape::new();
        let a = tape.leaf_slice(&[1.0, 2.0]);
        let b = tape.leaf_slice(&[1.0, 2.0, 3.0]);
        let c = tape.add(a, b);
        let s = tape.sum(c);
        assert!(matches!(
            tape.value_scalar(s),
            Err(Error::ShapeMismatch { op: "add", .. })
        ));
    }

    #[test]
    fn non_finite_value_reports_offending_op() {
        let mut tape = Tape::new();
        let a = tape.leaf_slice(&[-1.0]);
        let b = tape.log(a);
        let s = tape.sum(b);
        assert_eq!(
            tape.value_scalar(s),
            Err(Error::NonFinite { op: "log" })
        );
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let at = RealVector::from_slice(&[0.0, 1.0, -1.0]);
        let (_, grad) = grad_scalar(
            |t, z| {
                let r = t.relu(z);
                t.sum(r)
            },
            &at,
        )
        .unwrap();
        assert_eq!(grad.as_slice(), &[0.0, 1.0, 0.0]);
    }
}
