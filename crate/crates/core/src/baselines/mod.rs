//! Comparison methods: networks trained against a Gaussian-mollified delta,
//! physics-informed networks that solve one problem per training run, and a
//! finite-difference Green's matrix on the square.

mod gaussnet;
mod ngf;
mod pinn;

pub use gaussnet::{gauss_delta, gaussnet_loss, gaussnet_loss_and_gradient, train_gaussnet, train_gaussnet_with, GaussNetConfig};
pub use ngf::{ngf_solve, NgfSolution};
pub use pinn::{pinn_loss_and_gradient, train_pinn, train_pinn_with, PointBatch};
