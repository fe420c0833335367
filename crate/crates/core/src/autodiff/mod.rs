//! Exact input derivatives of networks and parameter gradients of losses built
//! from them.
//!
//! Second input derivatives come from second-order truncated Taylor
//! propagation, one input direction at a time; only the Hessian diagonal is
//! ever needed. Parameter gradients come from reverse accumulation: a scalar
//! [`LossGraph`] records the loss arithmetic, and network evaluations enter it
//! as batched jet nodes whose adjoint is propagated layer by layer.

mod batch;
mod check;
mod graph;
mod jet;

pub use batch::JetBatch;
pub use check::{finite_difference_check, FdReport};
pub use graph::{loss_param_gradient, BundleVars, LossGraph, Var};
pub use jet::{eval_with_derivatives, Jet2};

use std::ops::Range;

use crate::mlp::{LayerParams, Mlp};

/// Value, input gradient and input Hessian diagonal of a scalar function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeBundle {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess_diag: Vec<f64>,
}

impl DerivativeBundle {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Keeps only the coordinates in `range` (e.g. the `r` half of an `(r, ξ)` input).
    pub fn restrict(&self, range: Range<usize>) -> Self {
        Self {
            value: self.value,
            grad: self.grad[range.clone()].to_vec(),
            hess_diag: self.hess_diag[range].to_vec(),
        }
    }

    pub fn laplacian(&self) -> f64 {
        self.hess_diag.iter().sum()
    }

    pub fn scaled_sum(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect();
        Self {
            value: a * x.value + b * y.value,
            grad: mix(&x.grad, &y.grad),
            hess_diag: mix(&x.hess_diag, &y.hess_diag),
        }
    }
}

/// Gradient of a scalar with respect to every network parameter, laid out
/// exactly like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub layers: Vec<LayerParams>,
}

impl ParamGradient {
    pub fn zeros_like(net: &Mlp) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerParams::zeros(l.weights.ncols(), l.weights.nrows()))
            .collect();
        Self { layers }
    }

    pub fn is_congruent(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers().len()
            && self
                .layers
                .iter()
                .zip(net.layers())
                .all(|(g, l)| g.weights.dim() == l.weights.dim() && g.bias.len() == l.bias.len())
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub(crate) fn add_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w += it.next().unwrap();
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restrict_and_laplacian() {
        let b = DerivativeBundle { value: 1.0, grad: vec![1.0, 2.0, 3.0, 4.0], hess_diag: vec![0.5, 1.5, 7.0, 9.0] };
        let r = b.restrict(0..2);
        assert_eq!(r.grad, vec![1.0, 2.0]);
        assert_eq!(r.laplacian(), 2.0);
        assert_eq!(r.dim(), 2);
    }
}
