//! Linear operators of the catalog, their residuals, and the free-space
//! fundamental solution of the Laplacian.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{DerivativeBundle, Jet2};
use crate::error::{Error, Result};
use crate::geometry::{Domain, BOUNDARY_TOL};

/// Closer pairs than this are treated as sitting on the singularity.
pub const SINGULAR_DISTANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Poisson,
    Helmholtz,
    Heat,
    KleinGordon,
}

impl OperatorKind {
    /// Heat and Klein-Gordon read the last coordinate as time.
    pub fn has_time(self) -> bool {
        matches!(self, OperatorKind::Heat | OperatorKind::KleinGordon)
    }

    pub fn uses_k(self) -> bool {
        matches!(self, OperatorKind::Helmholtz | OperatorKind::KleinGordon)
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Poisson => "poisson",
            OperatorKind::Helmholtz => "helmholtz",
            OperatorKind::Heat => "heat",
            OperatorKind::KleinGordon => "klein_gordon",
        }
    }
}

/// Operator as written in a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    #[serde(default)]
    pub k: f64,
}

/// A constant-coefficient operator
/// `L v = Σ hess_coeff[i]·∂ᵢ²v + Σ grad_coeff[i]·∂ᵢv + value_coeff·v`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeOperator {
    kind: OperatorKind,
    k: f64,
    dim: usize,
}

impl PdeOperator {
    /// `dim` counts every coordinate, time included.
    pub fn new(kind: OperatorKind, k: f64, dim: usize) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::Config(format!("operator coefficient k must be finite, got {k}")));
        }
        let min_dim = if kind.has_time() { 2 } else { 1 };
        if dim < min_dim {
            return Err(Error::Config(format!("{} needs at least {min_dim} coordinates", kind.name())));
        }
        let k = if kind.uses_k() { k } else { 0.0 };
        Ok(Self { kind, k, dim })
    }

    pub fn from_spec(spec: &OperatorSpec, dim: usize) -> Result<Self> {
        Self::new(spec.kind, spec.k, dim)
    }

    pub fn poisson(dim: usize) -> Self {
        Self::new(OperatorKind::Poisson, 0.0, dim).unwrap()
    }

    pub fn helmholtz(k: f64, dim: usize) -> Result<Self> {
        Self::new(OperatorKind::Helmholtz, k, dim)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> OperatorSpec {
        OperatorSpec { kind: self.kind, k: self.k }
    }

    /// Stable identifier, e.g. `poisson` or `helmholtz(k=1)`.
    pub fn id(&self) -> String {
        if self.kind.uses_k() {
            format!("{}(k={})", self.kind.name(), self.k)
        } else {
            self.kind.name().to_string()
        }
    }

    pub fn hess_coefficients(&self) -> Vec<f64> {
        let mut c = vec![1.0; self.dim];
        match self.kind {
            OperatorKind::Heat => c[self.dim - 1] = 0.0,
            OperatorKind::KleinGordon => c[self.dim - 1] = -1.0,
            _ => {}
        }
        c
    }

    pub fn grad_coefficients(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        if self.kind == OperatorKind::Heat {
            c[self.dim - 1] = -1.0;
        }
        c
    }

    pub fn value_coefficient(&self) -> f64 {
        match self.kind {
            OperatorKind::Helmholtz => self.k * self.k,
            OperatorKind::KleinGordon => -self.k * self.k,
            _ => 0.0,
        }
    }

    /// Coordinates whose first derivative enters the operator.
    pub fn grad_directions(&self) -> Vec<usize> {
        self.grad_coefficients().iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(i, _)| i).collect()
    }

    /// `L v` at one point from its derivative bundle.
    pub fn residual(&self, d: &DerivativeBundle) -> Result<f64> {
        if d.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: d.dim() });
        }
        let hess: f64 = self.hess_coefficients().iter().zip(&d.hess_diag).map(|(c, h)| c * h).sum();
        let grad: f64 = self.grad_coefficients().iter().zip(&d.grad).map(|(c, g)| c * g).sum();
        Ok(hess + grad + self.value_coefficient() * d.value)
    }
}

impl fmt::Display for PdeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

fn check_pair(r: &[f64], xi: &[f64], dim: usize) -> Result<f64> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!("fundamental solution needs dimension 2 or 3, got {dim}")));
    }
    for len in [r.len(), xi.len()] {
        if len != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: len });
        }
    }
    let distance = r.iter().zip(xi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if distance < SINGULAR_DISTANCE {
        return Err(Error::Singularity { distance });
    }
    Ok(distance)
}

/// Fundamental solution of the Laplacian: `ln|r−ξ| / 2π` in 2D and
/// `−1 / (4π|r−ξ|)` in 3D, so that `Δ_r` of it is the unit point mass.
pub fn t_singular(r: &[f64], xi: &[f64], dim: usize) -> Result<f64> {
    let distance = check_pair(r, xi, dim)?;
    Ok(if dim == 2 { distance.ln() / (2.0 * PI) } else { -1.0 / (4.0 * PI * distance) })
}

/// [`t_singular`] with `r` carried as second-order jets.
pub fn t_singular_jet(r: &[Jet2], xi: &[f64]) -> Result<Jet2> {
    let plain: Vec<f64> = r.iter().map(|j| j.v).collect();
    check_pair(&plain, xi, r.len())?;
    let mut dist2 = Jet2::constant(0.0);
    for (a, &b) in r.iter().zip(xi) {
        let diff = *a - Jet2::constant(b);
        dist2 = dist2 + diff * diff;
    }
    Ok(if r.len() == 2 { (1.0 / (4.0 * PI)) * dist2.ln() } else { (-1.0 / (4.0 * PI)) * dist2.powf(-0.5) })
}

/// Dirichlet data `−t_s(r, ξ)` for the regular part, with `r` on the boundary.
pub fn t_singular_boundary_trace(domain: &Domain, r: &[f64], xi: &[f64]) -> Result<f64> {
    let distance = domain.boundary_distance(r)?;
    if distance > BOUNDARY_TOL {
        return Err(Error::NotOnBoundary { distance });
    }
    if !domain.contains(xi)? {
        return Err(Error::InvalidArgument("source point must be strictly interior".into()));
    }
    Ok(-t_singular(r, xi, domain.dim())?)
}

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A PDE `L u = f` on a domain with homogeneous Dirichlet data.
#[derive(Clone)]
pub struct ProblemInstance {
    pub operator: PdeOperator,
    pub domain: Domain,
    pub f: ScalarField,
    pub laplacian_of_f: ScalarField,
    /// Needed only by the boundary correction term.
    pub grad_f: Option<VectorField>,
}

impl fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("operator", &self.operator)
            .field("domain", &self.domain.id())
            .finish_non_exhaustive()
    }
}
