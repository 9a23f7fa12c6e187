//! Eager reverse-mode tape.
//!
//! A [`Tape`] records every operation as it is evaluated. [`Var`] is a cheap
//! copyable handle into the tape; the graph lives only as long as the tape and
//! is dropped after [`Tape::backward`].

use std::cell::RefCell;
use std::ops;

use super::params::ParamSet;
use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MatMul(usize, usize),
    MatMulNt(usize, usize),
    Tanh(usize),
    Relu(usize),
    Sigmoid(usize),
    Exp(usize),
    Log(usize),
    Square(usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize),
    MulScalar(usize, usize),
    Mean(usize),
    Sum(usize),
    SumCols(usize),
    ConcatCols(Vec<usize>),
    SliceCols(usize, usize),
    Clamp(usize, f64, f64),
    Minimum(usize, usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::MatMul(..) => "matmul",
            Op::MatMulNt(..) => "matmul_nt",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Square(_) => "square",
            Op::Neg(_) => "neg",
            Op::Scale(..) => "scale",
            Op::AddScalar(_) => "add_scalar",
            Op::MulScalar(..) => "mul_scalar",
            Op::Mean(_) => "mean",
            Op::Sum(_) => "sum",
            Op::SumCols(_) => "sum_cols",
            Op::ConcatCols(_) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::Clamp(..) => "clamp",
            Op::Minimum(..) => "minimum",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    fault: RefCell<Option<String>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).finish()
    }
}

/// Parameter set placed on a tape, one [`Var`] per tensor in set order.
pub struct Bound<'t> {
    names: Vec<String>,
    vars: Vec<Var<'t>>,
}

impl<'t> Bound<'t> {
    pub fn vars(&self) -> &[Var<'t>] {
        &self.vars
    }

    pub fn get(&self, name: &str) -> Option<Var<'t>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
    }
}

impl<'t> ops::Index<usize> for Bound<'t> {
    type Output = Var<'t>;
    fn index(&self, i: usize) -> &Var<'t> {
        &self.vars[i]
    }
}

/// Gradients of one scalar with respect to every node that required them.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> Option<Tensor> {
        self.grads[v.id]
            .as_ref()
            .map(|g| Tensor::from_raw(self.shapes[v.id].clone(), g.clone()))
    }

    /// Gradient for `v`, zero-filled when `v` did not influence the loss.
    pub fn get_or_zero(&self, v: Var<'_>) -> Tensor {
        self.get(v)
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.id]))
    }

    /// Gradients for a bound parameter set, keyed like the original set.
    pub fn wrt(&self, bound: &Bound<'_>) -> ParamSet {
        let mut out = ParamSet::new();
        for (name, v) in bound.names.iter().zip(&bound.vars) {
            out.insert(name, self.get_or_zero(*v))
                .expect("bound names are unique");
        }
        out
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Constant input; gradients are never propagated into it.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(value, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    /// Differentiable leaf.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(value, true)
    }

    /// Places every tensor of `params` on the tape as a differentiable leaf.
    pub fn bind(&self, params: &ParamSet) -> Bound<'_> {
        self.bind_with(params, true)
    }

    /// Places `params` on the tape as constants. The values take part in the
    /// forward computation but receive no gradient.
    pub fn bind_const(&self, params: &ParamSet) -> Bound<'_> {
        self.bind_with(params, false)
    }

    fn bind_with(&self, params: &ParamSet, requires_grad: bool) -> Bound<'_> {
        let mut names = Vec::with_capacity(params.len());
        let mut vars = Vec::with_capacity(params.len());
        for (name, t) in params.iter() {
            names.push(name.to_string());
            vars.push(self.push_leaf(t.clone(), requires_grad));
        }
        Bound { names, vars }
    }

    fn push_leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        if !value.is_finite() {
            self.record_fault("leaf");
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn record_fault(&self, op: &str) {
        let mut fault = self.fault.borrow_mut();
        if fault.is_none() {
            *fault = Some(op.to_string());
        }
    }

    /// Name of the first operation that produced a non-finite value, if any.
    pub fn fault(&self) -> Option<String> {
        self.fault.borrow().clone()
    }

    fn push(&self, op: Op, value: Tensor) -> Var<'_> {
        if !value.is_finite() {
            self.record_fault(op.name());
        }
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = inputs(&op).iter().any(|&i| nodes[i].requires_grad);
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value_of(&self, id: usize) -> Tensor {
        self.nodes.borrow()[id].value.clone()
    }

    fn unary(&self, a: usize, op: Op, f: impl Fn(f64) -> f64) -> Var<'_> {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a].value;
            Tensor::from_raw(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect())
        };
        self.push(op, value)
    }

    fn binary(&self, a: usize, b: usize, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'_> {
        let value = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a].value, &nodes[b].value);
            assert_eq!(x.shape(), y.shape(), "{}: operand shapes differ", op.name());
            Tensor::from_raw(
                x.shape().to_vec(),
                x.data()
                    .iter()
                    .zip(y.data())
                    .map(|(&u, &v)| f(u, v))
                    .collect(),
            )
        };
        self.push(op, value)
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat_cols<'a>(&'a self, parts: &[Var<'a>]) -> Var<'a> {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let value = {
            let nodes = self.nodes.borrow();
            let dims: Vec<(usize, usize)> =
                parts.iter().map(|p| nodes[p.id].value.dims2()).collect();
            let rows = dims[0].0;
            assert!(
                dims.iter().all(|d| d.0 == rows),
                "concat_cols: row counts differ: {dims:?}"
            );
            let cols: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for p in parts {
                    data.extend_from_slice(nodes[p.id].value.row_slice(r));
                }
            }
            Tensor::from_raw(vec![rows, cols], data)
        };
        self.push(Op::ConcatCols(parts.iter().map(|p| p.id).collect()), value)
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        if let Some(op) = self.fault() {
            return Err(Error::NonFinite { op });
        }
        let nodes = self.nodes.borrow();
        if !nodes[loss.id].value.is_scalar() {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            )));
        }
        let n = loss.id + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..n).rev() {
            let node = &nodes[id];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let contributions = local_grads(&nodes, id, &g);
            for (input, delta) in contributions {
                if !nodes[input].requires_grad {
                    continue;
                }
                if !super::tensor::all_finite(&delta) {
                    return Err(Error::NonFinite {
                        op: format!("{} (backward)", node.op.name()),
                    });
                }
                match &mut grads[input] {
                    Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
                    slot @ None => *slot = Some(delta),
                }
            }
            grads[id] = Some(g);
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn inputs(op: &Op) -> Vec<usize> {
    match op {
        Op::Leaf => vec![],
        Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::AddRow(a, b)
        | Op::MatMul(a, b)
        | Op::MatMulNt(a, b)
        | Op::MulScalar(a, b)
        | Op::Minimum(a, b) => vec![*a, *b],
        Op::Tanh(a)
        | Op::Relu(a)
        | Op::Sigmoid(a)
        | Op::Exp(a)
        | Op::Log(a)
        | Op::Square(a)
        | Op::Neg(a)
        | Op::Scale(a, _)
        | Op::AddScalar(a)
        | Op::Mean(a)
        | Op::Sum(a)
        | Op::SumCols(a)
        | Op::SliceCols(a, _)
        | Op::Clamp(a, _, _) => vec![*a],
        Op::ConcatCols(parts) => parts.clone(),
    }
}

/// Vector-Jacobian products of node `id` for upstream gradient `g`, for the
/// inputs that require gradients.
fn local_grads(nodes: &[Node], id: usize, g: &[f64]) -> Vec<(usize, Vec<f64>)> {
    let node = &nodes[id];
    let val = |i: usize| nodes[i].value.data();
    let out = node.value.data();
    let mut res: Vec<(usize, Vec<f64>)> = Vec::with_capacity(2);
    let mut emit = |i: usize, f: &dyn Fn() -> Vec<f64>| {
        if nodes[i].requires_grad {
            res.push((i, f()));
        }
    };
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            emit(*a, &|| g.to_vec());
            emit(*b, &|| g.to_vec());
        }
        Op::Sub(a, b) => {
            emit(*a, &|| g.to_vec());
            emit(*b, &|| g.iter().map(|v| -v).collect());
        }
        Op::Mul(a, b) => {
            emit(*a, &|| g.iter().zip(val(*b)).map(|(g, y)| g * y).collect());
            emit(*b, &|| g.iter().zip(val(*a)).map(|(g, x)| g * x).collect());
        }
        Op::AddRow(a, row) => {
            let (_, c) = nodes[*a].value.dims2();
            emit(*a, &|| g.to_vec());
            emit(*row, &|| {
                let mut grow = vec![0.0; c];
                for chunk in g.chunks(c) {
                    grow.iter_mut().zip(chunk).for_each(|(s, v)| *s += v);
                }
                grow
            });
        }
        Op::MatMul(a, b) => {
            let (m, k) = nodes[*a].value.dims2();
            let (_, n) = nodes[*b].value.dims2();
            emit(*a, &|| matmul_nt(g, val(*b), m, n, k));
            emit(*b, &|| matmul_tn(val(*a), g, m, k, n));
        }
        Op::MatMulNt(a, b) => {
            let (m, k) = nodes[*a].value.dims2();
            let (n, _) = nodes[*b].value.dims2();
            emit(*a, &|| matmul(g, val(*b), m, n, k));
            emit(*b, &|| matmul_tn(g, val(*a), m, n, k));
        }
        Op::Tanh(a) => emit(*a, &|| {
            g.iter().zip(out).map(|(g, y)| g * (1.0 - y * y)).collect()
        }),
        Op::Relu(a) => emit(*a, &|| {
            g.iter()
                .zip(val(*a))
                .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                .collect()
        }),
        Op::Sigmoid(a) => emit(*a, &|| {
            g.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect()
        }),
        Op::Exp(a) => emit(*a, &|| g.iter().zip(out).map(|(g, y)| g * y).collect()),
        Op::Log(a) => emit(*a, &|| g.iter().zip(val(*a)).map(|(g, x)| g / x).collect()),
        Op::Square(a) => emit(*a, &|| {
            g.iter().zip(val(*a)).map(|(g, x)| 2.0 * g * x).collect()
        }),
        Op::Neg(a) => emit(*a, &|| g.iter().map(|v| -v).collect()),
        Op::Scale(a, s) => emit(*a, &|| g.iter().map(|v| v * s).collect()),
        Op::AddScalar(a) => emit(*a, &|| g.to_vec()),
        Op::MulScalar(a, s) => {
            let sv = val(*s)[0];
            emit(*a, &|| g.iter().map(|v| v * sv).collect());
            emit(*s, &|| {
                vec![g.iter().zip(val(*a)).map(|(g, x)| g * x).sum()]
            });
        }
        Op::Mean(a) => {
            let n = nodes[*a].value.len();
            emit(*a, &|| vec![g[0] / n as f64; n]);
        }
        Op::Sum(a) => emit(*a, &|| vec![g[0]; nodes[*a].value.len()]),
        Op::SumCols(a) => {
            let (r, c) = nodes[*a].value.dims2();
            emit(*a, &|| {
                let mut d = Vec::with_capacity(r * c);
                for gv in g.iter().take(r) {
                    d.extend(std::iter::repeat_n(*gv, c));
                }
                d
            });
        }
        Op::ConcatCols(parts) => {
            let (rows, cols) = node.value.dims2();
            let mut offset = 0;
            for p in parts {
                let (_, pc) = nodes[*p].value.dims2();
                emit(*p, &|| {
                    let mut d = Vec::with_capacity(rows * pc);
                    for r in 0..rows {
                        d.extend_from_slice(&g[r * cols + offset..r * cols + offset + pc]);
                    }
                    d
                });
                offset += pc;
            }
        }
        Op::SliceCols(a, start) => {
            let (rows, cols) = nodes[*a].value.dims2();
            let (_, width) = node.value.dims2();
            emit(*a, &|| {
                let mut d = vec![0.0; rows * cols];
                for r in 0..rows {
                    d[r * cols + start..r * cols + start + width]
                        .copy_from_slice(&g[r * width..(r + 1) * width]);
                }
                d
            });
        }
        Op::Clamp(a, lo, hi) => emit(*a, &|| {
            g.iter()
                .zip(val(*a))
                .map(|(g, x)| if *x >= *lo && *x <= *hi { *g } else { 0.0 })
                .collect()
        }),
        Op::Minimum(a, b) => {
            let (x, y) = (val(*a), val(*b));
            emit(*a, &|| {
                g.iter()
                    .zip(x.iter().zip(y))
                    .map(|(g, (x, y))| if x <= y { *g } else { 0.0 })
                    .collect()
            });
            emit(*b, &|| {
                g.iter()
                    .zip(x.iter().zip(y))
                    .map(|(g, (x, y))| if x <= y { 0.0 } else { *g })
                    .collect()
            });
        }
    }
    res
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    /// Value of a single-element node.
    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value.item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    pub fn add(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self.id, other.id, Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self.id, other.id, Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self.id, other.id, Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn minimum(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self.id, other.id, Op::Minimum(self.id, other.id), f64::min)
    }

    /// Adds a length-`c` vector to every row of an `[r, c]` matrix.
    pub fn add_row(self, row: Var<'t>) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (x, b) = (&nodes[self.id].value, &nodes[row.id].value);
            let (r, c) = x.dims2();
            assert_eq!(
                b.len(),
                c,
                "add_row: bias length {} vs {c} columns",
                b.len()
            );
            let mut data = x.data().to_vec();
            for chunk in data.chunks_mut(c) {
                chunk.iter_mut().zip(b.data()).for_each(|(v, bv)| *v += bv);
            }
            Tensor::from_raw(vec![r, c], data)
        };
        self.tape.push(Op::AddRow(self.id, row.id), value)
    }

    /// `[m, k] · [k, n]`
    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            let (m, k) = a.dims2();
            let (k2, n) = b.dims2();
            assert_eq!(k, k2, "matmul: inner dims {k} vs {k2}");
            Tensor::from_raw(vec![m, n], matmul(a.data(), b.data(), m, k, n))
        };
        self.tape.push(Op::MatMul(self.id, other.id), value)
    }

    /// `[m, k] · [n, k]ᵀ`
    pub fn matmul_nt(self, other: Var<'t>) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            let (m, k) = a.dims2();
            let (n, k2) = b.dims2();
            assert_eq!(k, k2, "matmul_nt: inner dims {k} vs {k2}");
            Tensor::from_raw(vec![m, n], matmul_nt(a.data(), b.data(), m, k, n))
        };
        self.tape.push(Op::MatMulNt(self.id, other.id), value)
    }

    pub fn tanh(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Tanh(self.id), f64::tanh)
    }

    pub fn relu(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Relu(self.id), |x| x.max(0.0))
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Sigmoid(self.id), sigmoid)
    }

    pub fn exp(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Exp(self.id), f64::exp)
    }

    pub fn ln(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Log(self.id), f64::ln)
    }

    pub fn square(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Square(self.id), |x| x * x)
    }

    pub fn neg(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Neg(self.id), |x| -x)
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Scale(self.id, s), move |x| x * s)
    }

    pub fn add_scalar(self, s: f64) -> Var<'t> {
        self.tape
            .unary(self.id, Op::AddScalar(self.id), move |x| x + s)
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Clamp(self.id, lo, hi), move |x| {
                x.clamp(lo, hi)
            })
    }

    /// Multiplies every entry by the single-element node `s`.
    pub fn mul_scalar(self, s: Var<'t>) -> Var<'t> {
        let sv = s.item();
        self.tape
            .unary(self.id, Op::MulScalar(self.id, s.id), move |x| x * sv)
    }

    pub fn mean(self) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            Tensor::scalar(x.data().iter().sum::<f64>() / x.len() as f64)
        };
        self.tape.push(Op::Mean(self.id), value)
    }

    pub fn sum(self) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            Tensor::scalar(nodes[self.id].value.data().iter().sum())
        };
        self.tape.push(Op::Sum(self.id), value)
    }

    /// Row sums: `[r, c] -> [r, 1]`.
    pub fn sum_cols(self) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let (r, c) = x.dims2();
            let data = x
                .data()
                .chunks(c.max(1))
                .map(|ch| ch.iter().sum())
                .collect();
            Tensor::from_raw(vec![r, 1], data)
        };
        self.tape.push(Op::SumCols(self.id), value)
    }

    /// Columns `start..end` of an `[r, c]` matrix.
    pub fn slice_cols(self, start: usize, end: usize) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let (r, c) = x.dims2();
            assert!(start <= end && end <= c, "slice_cols {start}..{end} of {c}");
            let mut data = Vec::with_capacity(r * (end - start));
            for i in 0..r {
                data.extend_from_slice(&x.row_slice(i)[start..end]);
            }
            Tensor::from_raw(vec![r, end - start], data)
        };
        self.tape.push(Op::SliceCols(self.id, start), value)
    }
}

impl<'t> ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        Var::add(self, rhs)
    }
}

impl<'t> ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        Var::sub(self, rhs)
    }
}

impl<'t> ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        Var::mul(self, rhs)
    }
}

impl<'t> ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        Var::neg(self)
    }
}

/// Gradient of `loss` with respect to `params`, which must have been bound on
/// the same tape.
pub fn backward(loss: Var<'_>, params: &Bound<'_>) -> Result<ParamSet> {
    let grads = loss.tape.backward(loss)?;
    Ok(grads.wrt(params))
}
