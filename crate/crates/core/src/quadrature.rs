//! Quadrature rules over domains and solution construction by convolving a
//! trained kernel against `Δf`.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::autodiff::JetBatch;
use crate::error::{Error, Result};
use crate::geometry::{Domain, ShapeKind};
use crate::mlp::Mlp;

/// Pair rows evaluated per kernel call when convolving.
const PAIR_CHUNK: usize = 1 << 11;

/// Interior nodes (one per row) and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Array2<f64>,
    pub weights: Array1<f64>,
    pub resolution: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.ncols()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.sum()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.rows().into_iter().zip(self.weights.iter()).map(|(p, w)| w * f(p.as_slice().unwrap())).sum()
    }
}

/// Midpoint rule on a `resolution^n` grid over the bounding box, keeping the
/// cells whose midpoint is interior.
pub fn build_quadrature(domain: &Domain, resolution: usize) -> Result<QuadratureRule> {
    if resolution < 4 {
        return Err(Error::InvalidArgument(format!("quadrature resolution must be at least 4, got {resolution}")));
    }
    let (nodes, cell) = masked_midpoints(domain, resolution)?;
    let count = nodes.nrows();
    Ok(QuadratureRule { nodes, weights: Array1::from_elem(count, cell), resolution })
}

/// Interior cell midpoints of a `per_axis^n` grid over the bounding box, and
/// the cell volume.
fn masked_midpoints(domain: &Domain, per_axis: usize) -> Result<(Array2<f64>, f64)> {
    let n = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let h: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / per_axis as f64).collect();
    let cell: f64 = h.iter().product();
    let mut nodes = Vec::new();
    let mut index = vec![0usize; n];
    let mut p = vec![0.0; n];
    'grid: loop {
        for k in 0..n {
            p[k] = lo[k] + (index[k] as f64 + 0.5) * h[k];
        }
        if domain.contains(&p)? {
            nodes.extend_from_slice(&p);
        }
        for k in 0..n {
            index[k] += 1;
            if index[k] < per_axis {
                continue 'grid;
            }
            index[k] = 0;
        }
        break;
    }
    let count = nodes.len() / n;
    if count == 0 {
        return Err(Error::DegenerateDomain(format!("no interior cells at resolution {per_axis}")));
    }
    Ok((Array2::from_shape_vec((count, n), nodes).unwrap(), cell))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tensor Gauss–Legendre rule; only for the square, whose box is the domain.
pub fn gauss_legendre_square(domain: &Domain, order: usize) -> Result<QuadratureRule> {
    if domain.kind() != ShapeKind::Square {
        return Err(Error::Unsupported("Gauss-Legendre rules are only built for the square".into()));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("Gauss-Legendre order must be positive".into()));
    }
    let (lo, hi) = domain.bounding_box();
    let (x, w) = gauss_legendre(order);
    let mut nodes = Array2::zeros((order * order, 2));
    let mut weights = Array1::zeros(order * order);
    let half = [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0];
    for i in 0..order {
        for j in 0..order {
            let k = i * order + j;
            nodes[[k, 0]] = lo[0] + half[0] * (x[i] + 1.0);
            nodes[[k, 1]] = lo[1] + half[1] * (x[j] + 1.0);
            weights[k] = w[i] * w[j] * half[0] * half[1];
        }
    }
    Ok(QuadratureRule { nodes, weights, resolution: order })
}

/// Boundary nodes with measure weights and outward normals.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryRule {
    pub nodes: Array2<f64>,
    pub weights: Array1<f64>,
    pub normals: Array2<f64>,
}

impl BoundaryRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Midpoint partition of the boundary parameterisation: `resolution` nodes
/// along a 2D boundary, `resolution²` on a 3D surface.
pub fn build_boundary_rule(domain: &Domain, resolution: usize) -> Result<BoundaryRule> {
    if resolution < 4 {
        return Err(Error::InvalidArgument(format!("boundary resolution must be at least 4, got {resolution}")));
    }
    let n = domain.dim();
    let m = domain.boundary_param_dim();
    let count = resolution.pow(m as u32);
    let mut nodes = Array2::zeros((count, n));
    let mut density = Array1::zeros(count);
    let mut params = vec![0.0; m];
    for k in 0..count {
        let mut rest = k;
        for p in params.iter_mut() {
            *p = ((rest % resolution) as f64 + 0.5) / resolution as f64;
            rest /= resolution;
        }
        let (point, weight) = domain.boundary_point(&params);
        nodes.row_mut(k).assign(&Array1::from(point));
        density[k] = weight;
    }
    let weights = &density * (domain.boundary_measure() / density.sum());
    let mut normals = Array2::zeros((count, n));
    for k in 0..count {
        let normal = domain.boundary_normal(nodes.row(k).as_slice().unwrap())?;
        normals.row_mut(k).assign(&Array1::from(normal));
    }
    Ok(BoundaryRule { nodes, weights, normals })
}

/// A kernel `G(r, ξ)` that can be evaluated on rows of `(r, ξ)` pairs.
pub trait GreenKernel {
    /// Dimension `n` of one coordinate.
    fn coord_dim(&self) -> usize;

    fn eval_pairs(&self, pairs: ArrayView2<'_, f64>) -> Result<Array1<f64>>;

    /// `∇_ξ G` at each row; central differences unless overridden.
    fn source_gradient(&self, pairs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let n = self.coord_dim();
        let step = 1e-5;
        let mut out = Array2::zeros((pairs.nrows(), n));
        let mut shifted = pairs.to_owned();
        for d in 0..n {
            shifted.column_mut(n + d).mapv_inplace(|v| v + step);
            let up = self.eval_pairs(shifted.view())?;
            shifted.column_mut(n + d).mapv_inplace(|v| v - 2.0 * step);
            let down = self.eval_pairs(shifted.view())?;
            shifted.column_mut(n + d).assign(&pairs.column(n + d));
            out.column_mut(d).assign(&((up - down) / (2.0 * step)));
        }
        Ok(out)
    }
}

impl GreenKernel for Mlp {
    fn coord_dim(&self) -> usize {
        self.input_dim() / 2
    }

    fn eval_pairs(&self, pairs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.forward_batch(pairs)
    }

    fn source_gradient(&self, pairs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let n = self.coord_dim();
        let dirs: Vec<usize> = (n..2 * n).collect();
        let jb = JetBatch::forward(self, pairs, &dirs)?;
        Ok(Array2::from_shape_fn((pairs.nrows(), n), |(p, k)| jb.grad(p, k)))
    }
}

/// Closed-form kernel wrapped for convolution.
pub struct FnKernel<F> {
    pub dim: usize,
    pub kernel: F,
}

impl<F: Fn(&[f64], &[f64]) -> f64> GreenKernel for FnKernel<F> {
    fn coord_dim(&self) -> usize {
        self.dim
    }

    fn eval_pairs(&self, pairs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if pairs.ncols() != 2 * self.dim {
            return Err(Error::DimensionMismatch { expected: 2 * self.dim, got: pairs.ncols() });
        }
        Ok(pairs
            .rows()
            .into_iter()
            .map(|row| {
                let row = row.to_vec();
                (self.kernel)(&row[..self.dim], &row[self.dim..])
            })
            .collect())
    }
}

/// `u(r₀) = Σ_j w_j·G(r₀, ξ_j)·density(ξ_j)` for each row `r₀` of `eval_points`.
pub fn convolve(
    kernel: &dyn GreenKernel,
    rule: &QuadratureRule,
    density: &dyn Fn(&[f64]) -> f64,
    eval_points: ArrayView2<'_, f64>,
) -> Result<Array1<f64>> {
    let n = kernel.coord_dim();
    for got in [rule.dim(), eval_points.ncols()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    // nodes with zero weighted density contribute nothing; drop them
    let mut nodes = Vec::new();
    let mut coeffs = Vec::new();
    for (p, w) in rule.nodes.rows().into_iter().zip(rule.weights.iter()) {
        let c = w * density(p.as_slice().unwrap());
        if c != 0.0 {
            nodes.push(p);
            coeffs.push(c);
        }
    }
    let mut out = Array1::zeros(eval_points.nrows());
    if coeffs.is_empty() {
        return Ok(out);
    }
    let coeffs = Array1::from(coeffs);
    let m = nodes.len();
    // small calls keep the hidden activations in cache
    let node_block = PAIR_CHUNK.min(m);
    let per_call = (PAIR_CHUNK / m).max(1);
    let mut pairs = Array2::zeros((per_call * node_block, 2 * n));
    for start in (0..eval_points.nrows()).step_by(per_call) {
        let end = (start + per_call).min(eval_points.nrows());
        for first in (0..m).step_by(node_block) {
            let block = &nodes[first..(first + node_block).min(m)];
            let width = block.len();
            for (i, r0) in eval_points.slice(s![start..end, ..]).rows().into_iter().enumerate() {
                for (j, node) in block.iter().enumerate() {
                    let mut row = pairs.row_mut(i * width + j);
                    row.slice_mut(s![..n]).assign(&r0);
                    row.slice_mut(s![n..]).assign(node);
                }
            }
            let values = kernel.eval_pairs(pairs.slice(s![..(end - start) * width, ..]))?;
            let block_coeffs = coeffs.slice(s![first..first + width]);
            for (i, chunk) in values.axis_chunks_iter(Axis(0), width).enumerate() {
                out[start + i] += chunk.dot(&block_coeffs);
            }
        }
    }
    Ok(out)
}

/// Solution `u(r₀) = Σ_j w_j Ĝ^t(r₀, ξ_j) Δf(ξ_j)` at each row of `eval_points`.
pub fn construct_solution(
    kernel: &dyn GreenKernel,
    rule: &QuadratureRule,
    laplacian_of_f: &dyn Fn(&[f64]) -> f64,
    eval_points: ArrayView2<'_, f64>,
) -> Result<Array1<f64>> {
    convolve(kernel, rule, laplacian_of_f, eval_points)
}

/// Boundary term `∮ (f ∂Ĝ^t/∂n_ξ − Ĝ^t ∂f/∂n) ds` at `eval_point`; the
/// derivative of the kernel is taken in its source argument.
pub fn boundary_correction(
    kernel: &dyn GreenKernel,
    brule: &BoundaryRule,
    f: &dyn Fn(&[f64]) -> f64,
    grad_f: &dyn Fn(&[f64]) -> Vec<f64>,
    eval_point: &[f64],
) -> Result<f64> {
    let n = kernel.coord_dim();
    if eval_point.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: eval_point.len() });
    }
    let count = brule.len();
    let mut pairs = Array2::zeros((count, 2 * n));
    for (k, node) in brule.nodes.rows().into_iter().enumerate() {
        pairs.slice_mut(s![k, ..n]).assign(&ndarray::ArrayView1::from(eval_point));
        pairs.slice_mut(s![k, n..]).assign(&node);
    }
    let values = kernel.eval_pairs(pairs.view())?;
    let grads = kernel.source_gradient(pairs.view())?;
    let mut total = 0.0;
    for k in 0..count {
        let node = brule.nodes.row(k).to_vec();
        let normal = brule.normals.row(k);
        let dg_dn = grads.row(k).dot(&normal);
        let df_dn: f64 = grad_f(&node).iter().zip(normal.iter()).map(|(a, b)| a * b).sum();
        total += brule.weights[k] * (f(&node) * dg_dn - values[k] * df_dn);
    }
    Ok(total)
}

/// Centered-difference Laplacian with step `bounding-box diameter × 1e-4`,
/// for inputs whose Laplacian is not known in closed form. Accurate to
/// roughly `1e-8·|f|/step²`, so only a few digits for typical data.
pub fn finite_difference_laplacian<'a>(
    domain: &Domain,
    f: impl Fn(&[f64]) -> f64 + 'a,
) -> impl Fn(&[f64]) -> f64 + 'a {
    let (lo, hi) = domain.bounding_box();
    let diameter = lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    let h = diameter * 1e-4;
    move |x: &[f64]| {
        let centre = f(x);
        let mut p = x.to_vec();
        let mut sum = 0.0;
        for k in 0..x.len() {
            p[k] = x[k] + h;
            let up = f(&p);
            p[k] = x[k] - h;
            let down = f(&p);
            p[k] = x[k];
            sum += (up - 2.0 * centre + down) / (h * h);
        }
        sum
    }
}

/// Tensor grid of `n_per_axis^dim` points strictly inside the domain's
/// bounding box (cell midpoints), keeping only interior points.
pub fn interior_grid(domain: &Domain, n_per_axis: usize) -> Result<Array2<f64>> {
    if n_per_axis == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point per axis".into()));
    }
    Ok(masked_midpoints(domain, n_per_axis)?.0)
}
