use std::sync::atomic::{AtomicU64, Ordering};

use crate::autodiff::ParamGradient;
use crate::error::{Error, Result};
use crate::mlp::Mlp;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

static STEPS_TAKEN: AtomicU64 = AtomicU64::new(0);

/// Process-wide count of optimiser steps; lets callers verify that a code
/// path performed no training.
pub fn optimizer_steps_taken() -> u64 {
    STEPS_TAKEN.load(Ordering::Relaxed)
}

/// First and second moment estimates of Adam (no weight decay).
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self { m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    let n = state.m.len();
    for len in [params.len(), grads.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for i in 0..n {
        let g = grads[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    STEPS_TAKEN.fetch_add(1, Ordering::Relaxed);
    Ok(())
}

/// Applies [`adam_step`] to every parameter of `net`.
pub fn adam_step_net(state: &mut AdamState, net: &mut Mlp, grad: &ParamGradient, lr: f64) -> Result<()> {
    if !grad.is_congruent(net) {
        return Err(Error::InvalidArgument("gradient is not shaped like the network".into()));
    }
    let mut params = net.params_flat();
    adam_step(state, &mut params, &grad.flat(), lr)?;
    net.set_params_flat(&params)
}
