//! Finite-difference references on the square: a banded Cholesky solver and
//! the 5-point scheme for `Δu + c·u = f` with zero Dirichlet data.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::geometry::{Domain, ShapeKind};
use crate::operators::{OperatorKind, ProblemInstance};

/// Symmetric positive-definite band matrix, stored as `lower[i][d] = A[i, i−d]`,
/// factored in place as `L·Lᵀ`.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    size: usize,
    bandwidth: usize,
    lower: Array2<f64>,
}

impl BandedCholesky {
    /// `entries(i, d)` supplies `A[i, i−d]` for `d ≤ bandwidth`.
    pub fn factor(size: usize, bandwidth: usize, entries: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut lower = Array2::from_shape_fn((size, bandwidth + 1), |(i, d)| if d <= i { entries(i, d) } else { 0.0 });
        for i in 0..size {
            let first = i.saturating_sub(bandwidth);
            for j in first..=i {
                let mut sum = lower[[i, i - j]];
                let lo = first.max(j.saturating_sub(bandwidth));
                for k in lo..j {
                    sum -= lower[[i, i - k]] * lower[[j, j - k]];
                }
                if j == i {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::SingularSystem(i));
                    }
                    lower[[i, 0]] = sum.sqrt();
                } else {
                    lower[[i, i - j]] = sum / lower[[j, 0]];
                }
            }
        }
        Ok(Self { size, bandwidth, lower })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Array1<f64>> {
        if rhs.len() != self.size {
            return Err(Error::DimensionMismatch { expected: self.size, got: rhs.len() });
        }
        let bw = self.bandwidth;
        let mut y = Array1::from(rhs.to_vec());
        for i in 0..self.size {
            let mut sum = y[i];
            for k in i.saturating_sub(bw)..i {
                sum -= self.lower[[i, i - k]] * y[k];
            }
            y[i] = sum / self.lower[[i, 0]];
        }
        for i in (0..self.size).rev() {
            let mut sum = y[i];
            for k in i + 1..(i + bw + 1).min(self.size) {
                sum -= self.lower[[k, k - i]] * y[k];
            }
            y[i] = sum / self.lower[[i, 0]];
        }
        Ok(y)
    }
}

/// `−(Δ_h + shift·I)` on the `(grid_n−1)²` interior nodes of a square with
/// spacing `h`, nodes numbered row by row (`x` fastest).
pub fn negative_five_point(grid_n: usize, h: f64, shift: f64) -> Result<BandedCholesky> {
    let m = grid_n - 1;
    let inv_h2 = 1.0 / (h * h);
    BandedCholesky::factor(m * m, m, |i, d| match d {
        0 => 4.0 * inv_h2 - shift,
        1 if i % m != 0 => -inv_h2,
        d if d == m => -inv_h2,
        _ => 0.0,
    })
}

/// Grid solution on the interior nodes of a square.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSolution {
    pub grid_n: usize,
    pub spacing: f64,
    /// Interior nodes, one per row, numbered row by row.
    pub nodes: Array2<f64>,
    pub values: Array1<f64>,
}

/// Interior nodes `origin + (i, j)·h` for `1 ≤ i, j ≤ grid_n − 1`.
pub fn square_grid_nodes(domain: &Domain, grid_n: usize) -> (Array2<f64>, f64) {
    let (lo, hi) = domain.bounding_box();
    let h = (hi[0] - lo[0]) / grid_n as f64;
    let m = grid_n - 1;
    let nodes = Array2::from_shape_fn((m * m, 2), |(idx, c)| {
        let (i, j) = (idx % m + 1, idx / m + 1);
        lo[c] + if c == 0 { i as f64 } else { j as f64 } * h
    });
    (nodes, h)
}

/// 5-point finite-difference solution of a Poisson or Helmholtz problem on a
/// square. Second-order accurate in `h = side/grid_n`.
pub fn fdm_reference(problem: &ProblemInstance, grid_n: usize) -> Result<GridSolution> {
    if problem.domain.kind() != ShapeKind::Square {
        return Err(Error::Unsupported("finite-difference reference needs the square domain".into()));
    }
    if grid_n < 4 {
        return Err(Error::InvalidArgument(format!("grid_n must be at least 4, got {grid_n}")));
    }
    let shift = match problem.operator.kind() {
        OperatorKind::Poisson | OperatorKind::Helmholtz => problem.operator.value_coefficient(),
        other => return Err(Error::Unsupported(format!("finite-difference reference for {}", other.name()))),
    };
    let (nodes, h) = square_grid_nodes(&problem.domain, grid_n);
    let matrix = negative_five_point(grid_n, h, shift)?;
    let rhs: Vec<f64> = nodes.rows().into_iter().map(|p| -(problem.f)(p.as_slice().unwrap())).collect();
    let values = matrix.solve(&rhs)?;
    Ok(GridSolution { grid_n, spacing: h, nodes, values })
}
