use super::eval_with_derivatives;
use crate::error::{Error, Result};
use crate::mlp::Mlp;

/// Per-coordinate discrepancy between exact derivatives and central differences.
///
/// Each entry is `|exact − fd| / max(1, |exact|)`: relative for large
/// derivatives, absolute below unit scale.
#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub grad: Vec<f64>,
    pub hess_diag: Vec<f64>,
}

impl FdReport {
    pub fn max_grad(&self) -> f64 {
        self.grad.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_hess(&self) -> f64 {
        self.hess_diag.iter().copied().fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.max_grad().max(self.max_hess())
    }
}

fn discrepancy(exact: f64, approx: f64) -> f64 {
    (exact - approx).abs() / exact.abs().max(1.0)
}

pub fn finite_difference_check(net: &Mlp, x: &[f64], step: f64) -> Result<FdReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    let exact = eval_with_derivatives(net, x)?;
    let centre = net.forward(x)?;
    let mut grad = Vec::with_capacity(x.len());
    let mut hess_diag = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = net.forward(&probe)?;
        probe[i] = x[i] - step;
        let down = net.forward(&probe)?;
        probe[i] = x[i];
        grad.push(discrepancy(exact.grad[i], (up - down) / (2.0 * step)));
        hess_diag.push(discrepancy(exact.hess_diag[i], (up - 2.0 * centre + down) / (step * step)));
    }
    Ok(FdReport { grad, hess_diag })
}
