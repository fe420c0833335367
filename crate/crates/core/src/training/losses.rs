use ndarray::{Array1, ArrayView2};

use super::TrainConfig;
use crate::autodiff::{LossGraph, ParamGradient, Var};
use crate::error::{Error, Result};
use crate::geometry::SampleBatch;
use crate::mlp::Mlp;
use crate::operators::{t_singular, PdeOperator};

/// Weighted loss parts; `total` also includes any extra penalty terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValues {
    pub total: f64,
    pub residual: f64,
    pub boundary: f64,
}

/// Records `λ_res·mean(residuals²) + λ_bd·mean(boundary²)` and returns the
/// total node alongside the part values.
pub fn record_weighted_loss(
    graph: &mut LossGraph<'_>,
    residuals: &[Var],
    boundary: &[Var],
    lambda_res: f64,
    lambda_bd: f64,
) -> Result<(Var, LossValues)> {
    let mean_square = |graph: &mut LossGraph<'_>, items: &[Var]| -> Result<Var> {
        let squares: Vec<Var> = items.iter().map(|&v| graph.square(v)).collect();
        graph.mean(&squares)
    };
    let res = mean_square(graph, residuals)?;
    let res = graph.scale(res, lambda_res);
    let bd = mean_square(graph, boundary)?;
    let bd = graph.scale(bd, lambda_bd);
    let total = graph.add(res, bd);
    let values = LossValues { total: graph.value(total), residual: graph.value(res), boundary: graph.value(bd) };
    Ok((total, values))
}

fn check_batch(net: &Mlp, batch: &SampleBatch) -> Result<usize> {
    if batch.interior.nrows() == 0 || batch.boundary.nrows() == 0 {
        return Err(Error::InvalidArgument("training batch has no interior or no boundary pairs".into()));
    }
    let n = batch.dim();
    net.check_input(2 * n)?;
    Ok(n)
}

/// `t_s(r, ξ)` for every `(r, ξ)` row.
pub fn singular_part_rows(pairs: ArrayView2<'_, f64>, dim: usize) -> Result<Array1<f64>> {
    pairs
        .rows()
        .into_iter()
        .map(|row| {
            let row = row.to_vec();
            t_singular(&row[..dim], &row[dim..], dim)
        })
        .collect()
}

/// Stage-1 loss on `graph`: harmonic residual `Δ_r t̂_r` at interior pairs
/// and mismatch against `−t_s` at boundary pairs.
pub fn record_stage1_loss(graph: &mut LossGraph<'_>, batch: &SampleBatch, cfg: &TrainConfig) -> Result<(Var, LossValues)> {
    let n = check_batch(graph.net(), batch)?;
    let dirs: Vec<usize> = (0..n).collect();
    let bundles = graph.eval_with_derivatives(batch.interior.view(), &dirs)?;
    let residuals: Vec<Var> = bundles.iter().map(|b| graph.sum(&b.hess_diag)).collect();

    let targets = singular_part_rows(batch.boundary.view(), n)?;
    let values = graph.eval(batch.boundary.view())?;
    let boundary: Vec<Var> = values.iter().zip(targets.iter()).map(|(&v, &ts)| graph.add_const(v, ts)).collect();
    record_weighted_loss(graph, &residuals, &boundary, cfg.lambda_res, cfg.lambda_bd)
}

pub fn stage1_loss(net_tr: &Mlp, batch: &SampleBatch, cfg: &TrainConfig) -> Result<LossValues> {
    let mut graph = LossGraph::new(net_tr);
    Ok(record_stage1_loss(&mut graph, batch, cfg)?.1)
}

pub fn stage1_loss_and_gradient(
    net_tr: &Mlp,
    batch: &SampleBatch,
    cfg: &TrainConfig,
) -> Result<(LossValues, ParamGradient)> {
    let mut graph = LossGraph::new(net_tr);
    let (total, values) = record_stage1_loss(&mut graph, batch, cfg)?;
    Ok((values, graph.gradient(total)?))
}

/// Records `Σ_k c_k·v_k` of the operator applied to a recorded network
/// evaluation, minus `target`, for every point.
pub(crate) fn operator_residuals(
    graph: &mut LossGraph<'_>,
    op: &PdeOperator,
    points: ArrayView2<'_, f64>,
    targets: &Array1<f64>,
) -> Result<Vec<Var>> {
    let n = op.dim();
    let dirs: Vec<usize> = (0..n).collect();
    let bundles = graph.eval_with_derivatives(points, &dirs)?;
    let (hess_c, grad_c, value_c) = (op.hess_coefficients(), op.grad_coefficients(), op.value_coefficient());
    Ok(bundles
        .iter()
        .zip(targets.iter())
        .map(|(b, &target)| {
            let mut terms = Vec::with_capacity(2 * n + 1);
            for k in 0..n {
                if hess_c[k] != 0.0 {
                    terms.push((b.hess_diag[k], hess_c[k]));
                }
                if grad_c[k] != 0.0 {
                    terms.push((b.grad[k], grad_c[k]));
                }
            }
            if value_c != 0.0 {
                terms.push((b.value, value_c));
            }
            graph.affine(&terms, -target)
        })
        .collect())
}

/// Composite target `t = t_s + t̂_r` at each `(r, ξ)` row.
pub fn composite_t_rows(net_tr: &Mlp, pairs: ArrayView2<'_, f64>, dim: usize) -> Result<Array1<f64>> {
    net_tr.check_input(2 * dim)?;
    Ok(singular_part_rows(pairs, dim)? + net_tr.forward_batch(pairs)?)
}

/// Stage-2 loss on `graph`: `L_r Ĝ − t` at interior pairs and `Ĝ` itself at
/// boundary pairs.
pub fn record_stage2_loss(
    graph: &mut LossGraph<'_>,
    net_tr: &Mlp,
    op: &PdeOperator,
    batch: &SampleBatch,
    cfg: &TrainConfig,
) -> Result<(Var, LossValues)> {
    let n = check_batch(graph.net(), batch)?;
    if op.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: op.dim() });
    }
    let targets = composite_t_rows(net_tr, batch.interior.view(), n)?;
    let residuals = operator_residuals(graph, op, batch.interior.view(), &targets)?;
    let boundary = graph.eval(batch.boundary.view())?;
    record_weighted_loss(graph, &residuals, &boundary, cfg.lambda_res, cfg.lambda_bd)
}

pub fn stage2_loss(
    net_g: &Mlp,
    net_tr: &Mlp,
    op: &PdeOperator,
    batch: &SampleBatch,
    cfg: &TrainConfig,
) -> Result<LossValues> {
    let mut graph = LossGraph::new(net_g);
    Ok(record_stage2_loss(&mut graph, net_tr, op, batch, cfg)?.1)
}

pub fn stage2_loss_and_gradient(
    net_g: &Mlp,
    net_tr: &Mlp,
    op: &PdeOperator,
    batch: &SampleBatch,
    cfg: &TrainConfig,
) -> Result<(LossValues, ParamGradient)> {
    let mut graph = LossGraph::new(net_g);
    let (total, values) = record_stage2_loss(&mut graph, net_tr, op, batch, cfg)?;
    Ok((values, graph.gradient(total)?))
}
