//! Independent ground truths: closed-form Green's functions, manufactured
//! solutions, finite-difference references, and error metrics.

mod fdm;

pub use fdm::{fdm_reference, negative_five_point, square_grid_nodes, BandedCholesky, GridSolution};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Domain, ShapeKind};
use crate::operators::{OperatorKind, PdeOperator, ProblemInstance, ScalarField, VectorField, SINGULAR_DISTANCE};

/// Dirichlet Green's function of the Laplacian on the unit disk by the method
/// of images: `(1/2π)[ln|r−ξ| − ln(|ξ|·|r − ξ/|ξ|²|)]`.
pub fn disk_green_analytic(r: &[f64], xi: &[f64]) -> Result<f64> {
    if r.len() != 2 || xi.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: if r.len() != 2 { r.len() } else { xi.len() } });
    }
    let r2 = r[0] * r[0] + r[1] * r[1];
    let xi2 = xi[0] * xi[0] + xi[1] * xi[1];
    if r2 > 1.0 + 1e-12 || xi2 > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument("points must lie in the closed unit disk".into()));
    }
    let distance = ((r[0] - xi[0]).powi(2) + (r[1] - xi[1]).powi(2)).sqrt();
    if distance < SINGULAR_DISTANCE {
        return Err(Error::Singularity { distance });
    }
    // |ξ|·|r − ξ*| written without dividing by |ξ|, so ξ = 0 needs no special case
    let image = (r2 * xi2 - 2.0 * (r[0] * xi[0] + r[1] * xi[1]) + 1.0).max(0.0).sqrt();
    Ok((distance.ln() - image.ln()) / (2.0 * PI))
}

/// Eigen-expansion of the generalized Green's function `L⁻¹T` on the unit
/// square for `L = Δ + c` (Poisson or Helmholtz), truncated to `terms` modes
/// per axis:
/// `Σ 4 sin(aπx)sin(bπy)sin(aπξ)sin(bπη) / (μ_ab·(μ_ab − c))`, `μ_ab = π²(a²+b²)`.
pub fn square_generalized_green(operator: &PdeOperator, r: &[f64], xi: &[f64], terms: usize) -> Result<f64> {
    if !matches!(operator.kind(), OperatorKind::Poisson | OperatorKind::Helmholtz) || operator.dim() != 2 {
        return Err(Error::Unsupported(format!("square eigen-expansion for {operator} in {}D", operator.dim())));
    }
    if r.len() != 2 || xi.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: r.len().max(xi.len()) });
    }
    let shift = operator.value_coefficient();
    let sines = |v: f64| -> Vec<f64> { (1..=terms).map(|a| (a as f64 * PI * v).sin()).collect() };
    let (sx, sy, sxi, seta) = (sines(r[0]), sines(r[1]), sines(xi[0]), sines(xi[1]));
    let mut total = 0.0;
    for a in 0..terms {
        let px = sx[a] * sxi[a];
        for b in 0..terms {
            let mu = PI * PI * (((a + 1) * (a + 1) + (b + 1) * (b + 1)) as f64);
            if (mu - shift).abs() < 1e-12 {
                return Err(Error::SingularSystem(a * terms + b));
            }
            total += 4.0 * px * sy[b] * seta[b] / (mu * (mu - shift));
        }
    }
    Ok(total)
}

/// `‖values − reference‖₂ / ‖reference‖₂`.
pub fn relative_l2(values: &[f64], reference: &[f64]) -> Result<f64> {
    if values.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), got: values.len() });
    }
    let norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("relative error against an all-zero reference".into()));
    }
    let diff = values.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(diff / norm)
}

/// A problem with known solution `u`; `f = L u` and `Δf` in closed form.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub domain: Domain,
    pub operator: PdeOperator,
    pub u: ScalarField,
    pub f: ScalarField,
    pub laplacian_of_f: ScalarField,
    pub grad_f: VectorField,
    /// `f` does not vanish on the boundary, so the interior convolution alone
    /// misses part of the solution.
    pub needs_boundary_term: bool,
}

impl ManufacturedCase {
    pub fn problem(&self) -> ProblemInstance {
        ProblemInstance {
            operator: self.operator.clone(),
            domain: self.domain.clone(),
            f: self.f.clone(),
            laplacian_of_f: self.laplacian_of_f.clone(),
            grad_f: Some(self.grad_f.clone()),
        }
    }
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("domain", &self.domain.id())
            .field("operator", &self.operator.id())
            .finish_non_exhaustive()
    }
}

/// `u = sin(aπx)·sin(bπy)` on the unit square for `L = Δ + c`.
pub fn square_sine_case(operator: PdeOperator, a: u32, b: u32) -> ManufacturedCase {
    let (fa, fb) = (a as f64 * PI, b as f64 * PI);
    let mu = fa * fa + fb * fb;
    let scale = operator.value_coefficient() - mu;
    let name = format!("{}_square_sin{a}{b}", operator.kind().name());
    let u = move |p: &[f64]| (fa * p[0]).sin() * (fb * p[1]).sin();
    ManufacturedCase {
        name,
        domain: Domain::unit_square(),
        operator,
        u: Arc::new(u),
        f: Arc::new(move |p| scale * u(p)),
        laplacian_of_f: Arc::new(move |p| -mu * scale * u(p)),
        grad_f: Arc::new(move |p| {
            vec![scale * fa * (fa * p[0]).cos() * (fb * p[1]).sin(), scale * fb * (fa * p[0]).sin() * (fb * p[1]).cos()]
        }),
        needs_boundary_term: false,
    }
}

/// Polynomial in `s = x² + y²`, coefficients lowest degree first.
#[derive(Clone, Debug, PartialEq)]
struct RadialPoly(Vec<f64>);

impl RadialPoly {
    fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    fn derivative(&self) -> Self {
        RadialPoly(self.0.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect())
    }

    fn add_scaled(&self, other: &Self, scale: f64) -> Self {
        let len = self.0.len().max(other.0.len());
        RadialPoly((0..len).map(|i| self.0.get(i).unwrap_or(&0.0) + scale * other.0.get(i).unwrap_or(&0.0)).collect())
    }

    fn times_s(&self) -> Self {
        let mut c = vec![0.0];
        c.extend_from_slice(&self.0);
        RadialPoly(c)
    }

    /// 2D Laplacian of `g(x² + y²)`: `4(s·g'' + g')`.
    fn laplacian(&self) -> Self {
        let d1 = self.derivative();
        let d2 = d1.derivative();
        RadialPoly(vec![]).add_scaled(&d2.times_s(), 4.0).add_scaled(&d1, 4.0)
    }
}

fn disk_case(name: &str, operator: PdeOperator, u: RadialPoly, needs_boundary_term: bool) -> ManufacturedCase {
    let f = u.laplacian().add_scaled(&u, operator.value_coefficient());
    let lap_f = f.laplacian();
    let df = f.derivative();
    let s = |p: &[f64]| p[0] * p[0] + p[1] * p[1];
    let (u_c, f_c) = (u.clone(), f.clone());
    ManufacturedCase {
        name: name.to_string(),
        domain: Domain::unit_disk(),
        operator,
        u: Arc::new(move |p| u_c.eval(s(p))),
        f: Arc::new(move |p| f_c.eval(s(p))),
        laplacian_of_f: Arc::new(move |p| lap_f.eval(s(p))),
        grad_f: Arc::new(move |p| {
            let g = 2.0 * df.eval(s(p));
            vec![g * p[0], g * p[1]]
        }),
        needs_boundary_term,
    }
}

/// Every manufactured case shipped with the toolkit.
pub fn manufactured_catalog() -> Vec<ManufacturedCase> {
    let helmholtz = PdeOperator::helmholtz(1.0, 2).unwrap();
    let mut cases = vec![
        square_sine_case(PdeOperator::poisson(2), 1, 1),
        square_sine_case(helmholtz.clone(), 1, 1),
        // u = 1 − s: f = −4 does not vanish on the circle and Δf = 0
        disk_case("poisson_disk_paraboloid", PdeOperator::poisson(2), RadialPoly(vec![1.0, -1.0]), true),
        // u = (4s − s² − 3)/16: f = 1 − s
        disk_case("poisson_disk_quartic", PdeOperator::poisson(2), RadialPoly(vec![-3.0 / 16.0, 0.25, -1.0 / 16.0]), false),
        // u = (1 − s)³: both u and Δu vanish on the circle
        disk_case("helmholtz_disk_cubic", helmholtz, RadialPoly(vec![1.0, -3.0, 3.0, -1.0]), false),
    ];
    for (a, b) in [(1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (2, 3), (3, 2), (3, 3)] {
        cases.push(square_sine_case(PdeOperator::poisson(2), a, b));
    }
    cases
}

pub fn case_by_name(name: &str) -> Result<ManufacturedCase> {
    manufactured_catalog().into_iter().find(|c| c.name == name).ok_or_else(|| {
        let known: Vec<String> = manufactured_catalog().into_iter().map(|c| c.name).collect();
        Error::Config(format!("unknown case {name:?}; known cases: {}", known.join(", ")))
    })
}

/// Quadratic input `a₁x² + a₂xy + a₃y² + a₄x + a₅y + a₆`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticInput {
    pub coefficients: [f64; 6],
}

impl QuadraticInput {
    pub fn value(&self, p: &[f64]) -> f64 {
        let [a1, a2, a3, a4, a5, a6] = self.coefficients;
        a1 * p[0] * p[0] + a2 * p[0] * p[1] + a3 * p[1] * p[1] + a4 * p[0] + a5 * p[1] + a6
    }

    pub fn laplacian(&self) -> f64 {
        2.0 * (self.coefficients[0] + self.coefficients[2])
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let [a1, a2, a3, a4, a5, _] = self.coefficients;
        vec![2.0 * a1 * p[0] + a2 * p[1] + a4, a2 * p[0] + 2.0 * a3 * p[1] + a5]
    }

    /// Problem `L u = this` on `domain` with zero Dirichlet data; no closed-form
    /// solution, so references come from [`fdm_reference`].
    pub fn problem(&self, operator: PdeOperator, domain: Domain) -> ProblemInstance {
        let (a, b, c) = (*self, *self, self.laplacian());
        ProblemInstance {
            operator,
            domain,
            f: Arc::new(move |p| a.value(p)),
            laplacian_of_f: Arc::new(move |_| c),
            grad_f: Some(Arc::new(move |p| b.gradient(p))),
        }
    }
}

/// `count` quadratic inputs with coefficients drawn from Normal(0, 2).
pub fn quadratic_family(count: usize, seed: u64) -> Vec<QuadraticInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 2.0).unwrap();
    (0..count).map(|_| QuadraticInput { coefficients: std::array::from_fn(|_| normal.sample(&mut rng)) }).collect()
}

/// Largest `|u|` over `samples` boundary points of the case's domain.
pub fn max_boundary_value(case: &ManufacturedCase, samples: usize, seed: u64) -> Result<f64> {
    let pts = crate::geometry::sample_boundary(&case.domain, samples, seed)?;
    Ok(pts.rows().into_iter().map(|p| (case.u)(p.as_slice().unwrap()).abs()).fold(0.0, f64::max))
}

/// Whether the case lives on a domain the finite-difference reference covers.
pub fn has_grid_reference(case: &ManufacturedCase) -> bool {
    case.domain.kind() == ShapeKind::Square
}
