//! Mesh-free solver toolkit for linear PDEs built on trained generalized
//! Green's function kernels.

pub mod autodiff;
pub mod baselines;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod mlp;
pub mod operators;
pub mod oracles;
pub mod quadrature;
pub mod training;

pub use error::{Error, Result};
