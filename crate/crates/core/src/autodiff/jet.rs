use std::ops::{Add, Mul, Sub};

use super::DerivativeBundle;
use crate::error::Result;
use crate::mlp::{Activation, Mlp};

/// Second-order truncated Taylor scalar along one direction: `f`, `f'`, `f''`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Self { v, d: 0.0, dd: 0.0 }
    }

    pub fn variable(v: f64) -> Self {
        Self { v, d: 1.0, dd: 0.0 }
    }

    pub fn activate(self, act: Activation) -> Self {
        let [s, s1, s2, _] = act.derivatives(self.v);
        Self { v: s, d: s1 * self.d, dd: s2 * self.d * self.d + s1 * self.dd }
    }
}

impl Jet2 {
    pub fn ln(self) -> Self {
        Self { v: self.v.ln(), d: self.d / self.v, dd: self.dd / self.v - (self.d / self.v).powi(2) }
    }

    pub fn powf(self, p: f64) -> Self {
        let base = self.v.powf(p - 2.0);
        let (f1, f2) = (p * base * self.v, p * (p - 1.0) * base);
        Self { v: base * self.v * self.v, d: f1 * self.d, dd: f2 * self.d * self.d + f1 * self.dd }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v - o.v, d: self.d - o.d, dd: self.dd - o.dd }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v * o.v, d: self.d * o.v + self.v * o.d, dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v + o.v, d: self.d + o.d, dd: self.dd + o.dd }
    }
}

impl Mul<Jet2> for f64 {
    type Output = Jet2;
    fn mul(self, j: Jet2) -> Jet2 {
        Jet2 { v: self * j.v, d: self * j.d, dd: self * j.dd }
    }
}

fn propagate(net: &Mlp, x: &[f64], dir: usize) -> Jet2 {
    let mut act: Vec<Jet2> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == dir { Jet2::variable(v) } else { Jet2::constant(v) })
        .collect();
    let last = net.layers().len() - 1;
    for (l, layer) in net.layers().iter().enumerate() {
        let mut next = Vec::with_capacity(layer.bias.len());
        for (row, &b) in layer.weights.outer_iter().zip(layer.bias.iter()) {
            // same accumulation order as Mlp::forward, so values agree bit for bit
            let mut acc = Jet2::default();
            for (w, a) in row.iter().zip(&act) {
                acc = acc + *w * *a;
            }
            let z = Jet2 { v: acc.v + b, ..acc };
            next.push(if l == last { net.output_scale() * z } else { z.activate(net.activation()) });
        }
        act = next;
    }
    act[0]
}

/// Value, gradient and Hessian diagonal of `net` at `x`, exact up to roundoff.
pub fn eval_with_derivatives(net: &Mlp, x: &[f64]) -> Result<DerivativeBundle> {
    net.check_input(x.len())?;
    let mut grad = Vec::with_capacity(x.len());
    let mut hess_diag = Vec::with_capacity(x.len());
    let mut value = 0.0;
    for dir in 0..x.len() {
        let j = propagate(net, x, dir);
        value = j.v;
        grad.push(j.d);
        hess_diag.push(j.dd);
    }
    Ok(DerivativeBundle { value, grad, hess_diag })
}
