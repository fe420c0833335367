use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{LossGraph, ParamGradient, Var};
use crate::error::{Error, Result};
use crate::geometry::{sample_boundary_with, sample_interior_with, Domain};
use crate::mlp::Mlp;
use crate::operators::ProblemInstance;
use crate::training::{operator_residuals, optimize, record_weighted_loss, LossValues, TrainConfig, TrainReport};

/// Single points (one per row) for training a solution network directly.
#[derive(Clone, Debug, PartialEq)]
pub struct PointBatch {
    pub interior: Array2<f64>,
    pub boundary: Array2<f64>,
}

impl PointBatch {
    pub fn generate(domain: &Domain, n_interior: usize, n_boundary: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interior = sample_interior_with(domain, n_interior, &mut rng)?;
        let boundary = sample_boundary_with(domain, n_boundary, &mut rng)?;
        Ok(Self { interior, boundary })
    }
}

fn record_pinn_loss(graph: &mut LossGraph<'_>, problem: &ProblemInstance, batch: &PointBatch, cfg: &TrainConfig) -> Result<(Var, LossValues)> {
    let n = problem.domain.dim();
    graph.net().check_input(n)?;
    if batch.interior.nrows() == 0 || batch.boundary.nrows() == 0 {
        return Err(Error::InvalidArgument("training batch has no interior or no boundary points".into()));
    }
    let targets: Array1<f64> = batch.interior.rows().into_iter().map(|p| (problem.f)(p.as_slice().unwrap())).collect();
    let residuals = operator_residuals(graph, &problem.operator, batch.interior.view(), &targets)?;
    let boundary = graph.eval(batch.boundary.view())?;
    record_weighted_loss(graph, &residuals, &boundary, cfg.lambda_res, cfg.lambda_bd)
}

/// `λ_res·mean|L û − f|² + λ_bd·mean|û|²`.
pub fn pinn_loss_and_gradient(
    net: &Mlp,
    problem: &ProblemInstance,
    batch: &PointBatch,
    cfg: &TrainConfig,
) -> Result<(LossValues, ParamGradient)> {
    let mut graph = LossGraph::new(net);
    let (total, values) = record_pinn_loss(&mut graph, problem, batch, cfg)?;
    Ok((values, graph.gradient(total)?))
}

pub fn train_pinn(problem: &ProblemInstance, cfg: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    train_pinn_with(problem, cfg, &mut |_, _| {})
}

/// Trains `û` for this one problem; batch sizes are `n_dm` and `n_bd`.
pub fn train_pinn_with(
    problem: &ProblemInstance,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(usize, &LossValues),
) -> Result<(Mlp, TrainReport)> {
    let domain = &problem.domain;
    if problem.operator.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: problem.operator.dim() });
    }
    let mut net = cfg.network.build(domain.dim(), cfg.seed)?;
    let report = optimize(
        &mut net,
        cfg,
        |seed| PointBatch::generate(domain, cfg.n_dm, cfg.n_bd, seed),
        |net, batch| pinn_loss_and_gradient(net, problem, batch, cfg),
        progress,
    )?;
    Ok((net, report))
}
