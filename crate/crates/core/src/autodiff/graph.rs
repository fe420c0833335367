//! Reverse-mode scalar graph for training losses.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and the reverse sweep is a single backwards pass.

use ndarray::{Array1, ArrayView2};

use super::{JetBatch, ParamGradient};
use crate::error::{Error, Result};
use crate::mlp::Mlp;

/// Handle to a node of a [`LossGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Graph handles for one point of a recorded network batch. `grad` and
/// `hess_diag` follow the direction list passed at recording time.
#[derive(Clone, Debug)]
pub struct BundleVars {
    pub value: Var,
    pub grad: Vec<Var>,
    pub hess_diag: Vec<Var>,
}

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param(usize),
    NetOutput { batch: usize, slot: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// `Σ coeff · arg` plus a constant folded into the node value
    Affine { terms: Vec<(usize, f64)> },
    Square(usize),
    Tanh(usize),
    Sin(usize),
    Exp(usize),
    Ln(usize),
    // Evaluable but not differentiable everywhere; rejected by the reverse sweep.
    Abs,
    Relu,
}

impl Op {
    fn unsupported_name(&self) -> Option<&'static str> {
        match self {
            Op::Abs => Some("abs"),
            Op::Relu => Some("relu"),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    value: f64,
    op: Op,
}

/// Scalar computation graph over the parameters of one network.
pub struct LossGraph<'n> {
    net: &'n Mlp,
    nodes: Vec<Node>,
    batches: Vec<JetBatch>,
}

impl<'n> LossGraph<'n> {
    pub fn new(net: &'n Mlp) -> Self {
        Self { net, nodes: Vec::new(), batches: Vec::new() }
    }

    pub fn net(&self) -> &'n Mlp {
        self.net
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: f64, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    pub fn value(&self, v: Var) -> f64 {
        self.val(v)
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(value, Op::Const)
    }

    /// Leaf for the parameter at `index` in [`Mlp::params_flat`] order.
    pub fn param(&mut self, index: usize) -> Result<Var> {
        let n = self.net.num_params();
        if index >= n {
            return Err(Error::InvalidArgument(format!("parameter index {index} out of range ({n})")));
        }
        let value = self.net.params_flat()[index];
        Ok(self.push(value, Op::Param(index)))
    }

    /// Leaves for every parameter, in [`Mlp::params_flat`] order.
    pub fn params(&mut self) -> Vec<Var> {
        self.net
            .params_flat()
            .into_iter()
            .enumerate()
            .map(|(i, v)| self.push(v, Op::Param(i)))
            .collect()
    }

    /// Evaluates the network with derivatives along `dirs` at each row of
    /// `points` and returns graph handles for the results.
    pub fn eval_with_derivatives(&mut self, points: ArrayView2<'_, f64>, dirs: &[usize]) -> Result<Vec<BundleVars>> {
        let jb = JetBatch::forward(self.net, points, dirs)?;
        let id = self.batches.len();
        let mut out = Vec::with_capacity(jb.len());
        for p in 0..jb.len() {
            let value = self.push(jb.value(p), Op::NetOutput { batch: id, slot: jb.value_slot(p) });
            let mut grad = Vec::with_capacity(dirs.len());
            let mut hess_diag = Vec::with_capacity(dirs.len());
            for k in 0..dirs.len() {
                grad.push(self.push(jb.grad(p, k), Op::NetOutput { batch: id, slot: jb.grad_slot(p, k) }));
                hess_diag.push(self.push(jb.hess(p, k), Op::NetOutput { batch: id, slot: jb.hess_slot(p, k) }));
            }
            out.push(BundleVars { value, grad, hess_diag });
        }
        self.batches.push(jb);
        Ok(out)
    }

    /// Network values only (no input derivatives) at each row of `points`.
    pub fn eval(&mut self, points: ArrayView2<'_, f64>) -> Result<Vec<Var>> {
        Ok(self.eval_with_derivatives(points, &[])?.into_iter().map(|b| b.value).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) + self.val(b), Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) - self.val(b), Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) * self.val(b), Op::Mul(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.affine(&[(a, c)], 0.0)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.affine(&[(a, 1.0)], c)
    }

    pub fn affine(&mut self, terms: &[(Var, f64)], constant: f64) -> Var {
        let mut value = constant;
        for &(v, c) in terms {
            value += c * self.val(v);
        }
        let terms = terms.iter().map(|&(v, c)| (v.0, c)).collect();
        self.push(value, Op::Affine { terms })
    }

    pub fn sum(&mut self, items: &[Var]) -> Var {
        let terms: Vec<_> = items.iter().map(|&v| (v, 1.0)).collect();
        self.affine(&terms, 0.0)
    }

    /// Mean of `items`; the mean of nothing is an error rather than NaN.
    pub fn mean(&mut self, items: &[Var]) -> Result<Var> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("mean over an empty set".into()));
        }
        let w = 1.0 / items.len() as f64;
        let terms: Vec<_> = items.iter().map(|&v| (v, w)).collect();
        Ok(self.affine(&terms, 0.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let x = self.val(a);
        self.push(x * x, Op::Square(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.push(self.val(a).tanh(), Op::Tanh(a.0))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.push(self.val(a).sin(), Op::Sin(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.push(self.val(a).exp(), Op::Exp(a.0))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.push(self.val(a).ln(), Op::Ln(a.0))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.push(self.val(a).abs(), Op::Abs)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.push(self.val(a).max(0.0), Op::Relu)
    }

    /// `∂loss/∂θ` for every parameter of the graph's network.
    pub fn gradient(&self, loss: Var) -> Result<ParamGradient> {
        let n = loss.0 + 1;
        let mut adj = vec![0.0; n];
        let mut reached = vec![false; n];
        adj[loss.0] = 1.0;
        reached[loss.0] = true;

        let mut seeds: Vec<Array1<f64>> = self.batches.iter().map(|b| Array1::zeros(b.slots())).collect();
        let mut param_adj: Vec<f64> = Vec::new();

        for i in (0..n).rev() {
            if !reached[i] {
                continue;
            }
            let node = &self.nodes[i];
            if let Some(name) = node.op.unsupported_name() {
                return Err(Error::UnsupportedPrimitive(name));
            }
            let a = adj[i];
            let mut send = |j: usize, g: f64, adj: &mut Vec<f64>| {
                reached[j] = true;
                adj[j] += g;
            };
            match &node.op {
                Op::Const => {}
                Op::Param(idx) => {
                    if param_adj.is_empty() {
                        param_adj = vec![0.0; self.net.num_params()];
                    }
                    param_adj[*idx] += a;
                }
                Op::NetOutput { batch, slot } => seeds[*batch][*slot] += a,
                Op::Add(x, y) => {
                    send(*x, a, &mut adj);
                    send(*y, a, &mut adj);
                }
                Op::Sub(x, y) => {
                    send(*x, a, &mut adj);
                    send(*y, -a, &mut adj);
                }
                Op::Mul(x, y) => {
                    let (vx, vy) = (self.nodes[*x].value, self.nodes[*y].value);
                    send(*x, a * vy, &mut adj);
                    send(*y, a * vx, &mut adj);
                }
                Op::Affine { terms } => {
                    for &(j, c) in terms {
                        send(j, a * c, &mut adj);
                    }
                }
                Op::Square(x) => {
                    let vx = self.nodes[*x].value;
                    send(*x, 2.0 * a * vx, &mut adj);
                }
                Op::Tanh(x) => send(*x, a * (1.0 - node.value * node.value), &mut adj),
                Op::Sin(x) => {
                    let vx = self.nodes[*x].value;
                    send(*x, a * vx.cos(), &mut adj);
                }
                Op::Exp(x) => send(*x, a * node.value, &mut adj),
                Op::Ln(x) => {
                    let vx = self.nodes[*x].value;
                    send(*x, a / vx, &mut adj);
                }
                Op::Abs | Op::Relu => unreachable!("rejected above"),
            }
        }

        let mut grad = ParamGradient::zeros_like(self.net);
        for (jb, seed) in self.batches.iter().zip(&seeds) {
            jb.backward(self.net, seed.view(), &mut grad)?;
        }
        if !param_adj.is_empty() {
            grad.add_flat(&param_adj);
        }
        Ok(grad)
    }
}

/// Gradient of the scalar `loss` recorded in `graph` with respect to the
/// parameters of the graph's network.
pub fn loss_param_gradient(graph: &LossGraph<'_>, loss: Var) -> Result<ParamGradient> {
    graph.gradient(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{init_mlp, Activation};
    use ndarray::Array2;

    #[test]
    fn half_squared_norm_gradient_is_theta() {
        let net = init_mlp(&[2, 5, 4, 1], Activation::Tanh, 3).unwrap();
        let mut g = LossGraph::new(&net);
        let params = g.params();
        let squares: Vec<_> = params.iter().map(|&p| g.square(p)).collect();
        let total = g.sum(&squares);
        let loss = g.scale(total, 0.5);
        let grad = loss_param_gradient(&g, loss).unwrap();
        assert_eq!(grad.flat(), net.params_flat());
    }

    #[test]
    fn parameter_free_loss_has_zero_gradient() {
        let net = init_mlp(&[2, 5, 1], Activation::Tanh, 3).unwrap();
        let mut g = LossGraph::new(&net);
        let a = g.constant(2.0);
        let b = g.constant(3.0);
        let loss = g.mul(a, b);
        let grad = g.gradient(loss).unwrap();
        assert!(grad.flat().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unsupported_primitive_named() {
        let net = init_mlp(&[2, 5, 1], Activation::Tanh, 3).unwrap();
        let mut g = LossGraph::new(&net);
        let pts = Array2::from_elem((2, 2), 0.3);
        let vals = g.eval(pts.view()).unwrap();
        let d = g.sub(vals[0], vals[1]);
        let a = g.abs(d);
        let err = g.gradient(a).unwrap_err();
        assert!(matches!(err, Error::UnsupportedPrimitive("abs")));
        assert!(err.to_string().contains("abs"));
        // an unreachable abs node does not block differentiation
        let sq = g.square(d);
        assert!(g.gradient(sq).is_ok());
    }

    #[test]
    fn smooth_primitives_match_differences() {
        let net = init_mlp(&[2, 6, 1], Activation::Sine, 8).unwrap();
        let pts = Array2::from_shape_fn((3, 2), |(i, j)| 0.2 * i as f64 + 0.1 * j as f64);
        let build = |n: &Mlp| -> (f64, ParamGradient) {
            let mut g = LossGraph::new(n);
            let b = g.eval_with_derivatives(pts.view(), &[0, 1]).unwrap();
            let mut terms = Vec::new();
            for bv in &b {
                let t = g.tanh(bv.value);
                let e = g.exp(bv.grad[0]);
                let s = g.sin(bv.hess_diag[1]);
                let c = g.add_const(e, 1.5);
                let l = g.ln(c);
                let m = g.mul(t, l);
                let q = g.add(m, s);
                terms.push(q);
            }
            let loss = g.mean(&terms).unwrap();
            (g.value(loss), g.gradient(loss).unwrap())
        };
        let (_, grad) = build(&net);
        let theta = net.params_flat();
        let analytic = grad.flat();
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += 1e-6;
            let mut plus = net.clone();
            plus.set_params_flat(&t).unwrap();
            t[i] -= 2e-6;
            let mut minus = net.clone();
            minus.set_params_flat(&t).unwrap();
            let fd = (build(&plus).0 - build(&minus).0) / 2e-6;
            assert!((fd - analytic[i]).abs() < 1e-6 * fd.abs().max(1.0), "param {i}");
        }
    }

    #[test]
    fn empty_mean_is_error() {
        let net = init_mlp(&[2, 2, 1], Activation::Tanh, 0).unwrap();
        let mut g = LossGraph::new(&net);
        assert!(g.mean(&[]).is_err());
    }
}
