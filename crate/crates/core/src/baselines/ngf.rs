use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::geometry::{Domain, ShapeKind};
use crate::operators::{OperatorKind, PdeOperator};
use crate::oracles::{negative_five_point, square_grid_nodes};

/// Discrete Green's matrix of the 5-point Laplacian on a square.
#[derive(Clone, Debug, PartialEq)]
pub struct NgfSolution {
    pub grid_n: usize,
    pub spacing: f64,
    /// Interior nodes, one per row, numbered row by row.
    pub nodes: Array2<f64>,
    /// `green[[i, j]]` approximates `G(r_i, ξ_j)`.
    pub green: Array2<f64>,
}

impl NgfSolution {
    /// `u_i = Σ_j G(r_i, ξ_j)·f(ξ_j)·h²` at every interior node.
    pub fn solve(&self, f: &dyn Fn(&[f64]) -> f64) -> Array1<f64> {
        let density: Array1<f64> =
            self.nodes.rows().into_iter().map(|p| f(p.as_slice().unwrap()) * self.spacing * self.spacing).collect();
        self.green.dot(&density)
    }
}

/// Solves `A·g_j = e_j/h²` for every interior node `j`, with `A` the 5-point
/// Laplacian with zero Dirichlet data.
pub fn ngf_solve(domain: &Domain, operator: &PdeOperator, grid_n: usize) -> Result<NgfSolution> {
    if domain.kind() != ShapeKind::Square {
        return Err(Error::Unsupported(format!("numeric Green's function on {}", domain.kind())));
    }
    if operator.kind() != OperatorKind::Poisson || operator.dim() != 2 {
        return Err(Error::Unsupported(format!("numeric Green's function for {operator}")));
    }
    if grid_n < 16 {
        return Err(Error::InvalidArgument(format!("grid_n must be at least 16, got {grid_n}")));
    }
    let (nodes, h) = square_grid_nodes(domain, grid_n);
    // factor −A, then negate the solutions
    let matrix = negative_five_point(grid_n, h, 0.0)?;
    let size = nodes.nrows();
    let mut green = Array2::zeros((size, size));
    let mut rhs = vec![0.0; size];
    for j in 0..size {
        rhs[j] = -1.0 / (h * h);
        let column = matrix.solve(&rhs)?;
        green.column_mut(j).assign(&column);
        rhs[j] = 0.0;
    }
    Ok(NgfSolution { grid_n, spacing: h, nodes, green })
}
