use std::f64::consts::PI;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::autodiff::{LossGraph, ParamGradient, Var};
use crate::error::{Error, Result};
use crate::geometry::{Domain, SampleBatch};
use crate::mlp::Mlp;
use crate::operators::PdeOperator;
use crate::training::{operator_residuals, optimize, record_weighted_loss, LossValues, TrainConfig, TrainReport, MIN_PAIR_SEPARATION};

/// Training settings for a kernel fitted against `δ_ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussNetConfig {
    pub train: TrainConfig,
    pub epsilon: f64,
    #[serde(default)]
    pub symmetry_loss_weight: f64,
}

impl GaussNetConfig {
    pub fn new(train: TrainConfig, epsilon: f64) -> Self {
        Self { train, epsilon, symmetry_loss_weight: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.symmetry_loss_weight >= 0.0 && self.symmetry_loss_weight.is_finite()) {
            return Err(Error::Config(format!(
                "symmetry_loss_weight must be nonnegative, got {}",
                self.symmetry_loss_weight
            )));
        }
        Ok(())
    }
}

/// Unit-mass isotropic Gaussian `(2πε²)^(−n/2)·exp(−|r−ξ|²/(2ε²))`.
pub fn gauss_delta(r: &[f64], xi: &[f64], epsilon: f64, dim: usize) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if r.len() != dim || xi.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: if r.len() != dim { r.len() } else { xi.len() } });
    }
    let dist2: f64 = r.iter().zip(xi).map(|(a, b)| (a - b).powi(2)).sum();
    let variance = epsilon * epsilon;
    Ok((2.0 * PI * variance).powf(-(dim as f64) / 2.0) * (-dist2 / (2.0 * variance)).exp())
}

/// Rows `(ξ, r)` for rows `(r, ξ)`.
fn swapped(pairs: &Array2<f64>) -> Array2<f64> {
    let n = pairs.ncols() / 2;
    let mut out = Array2::zeros(pairs.raw_dim());
    out.slice_mut(s![.., ..n]).assign(&pairs.slice(s![.., n..]));
    out.slice_mut(s![.., n..]).assign(&pairs.slice(s![.., ..n]));
    out
}

fn record_gaussnet_loss(
    graph: &mut LossGraph<'_>,
    op: &PdeOperator,
    batch: &SampleBatch,
    cfg: &GaussNetConfig,
) -> Result<(Var, LossValues)> {
    let n = batch.dim();
    if op.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: op.dim() });
    }
    if batch.interior.nrows() == 0 || batch.boundary.nrows() == 0 {
        return Err(Error::InvalidArgument("training batch has no interior or no boundary pairs".into()));
    }
    let targets = batch
        .interior
        .rows()
        .into_iter()
        .map(|row| {
            let row = row.to_vec();
            gauss_delta(&row[..n], &row[n..], cfg.epsilon, n)
        })
        .collect::<Result<Array1<f64>>>()?;
    let residuals = operator_residuals(graph, op, batch.interior.view(), &targets)?;
    let boundary = graph.eval(batch.boundary.view())?;
    let (mut total, mut values) =
        record_weighted_loss(graph, &residuals, &boundary, cfg.train.lambda_res, cfg.train.lambda_bd)?;
    if cfg.symmetry_loss_weight > 0.0 {
        let forward = graph.eval(batch.interior.view())?;
        let backward = graph.eval(swapped(&batch.interior).view())?;
        let gaps: Vec<Var> = forward.iter().zip(&backward).map(|(&a, &b)| graph.sub(a, b)).collect();
        let squares: Vec<Var> = gaps.iter().map(|&g| graph.square(g)).collect();
        let sym = graph.mean(&squares)?;
        let sym = graph.scale(sym, cfg.symmetry_loss_weight);
        total = graph.add(total, sym);
        values.total = graph.value(total);
    }
    Ok((total, values))
}

/// `λ_res·mean|L_r Ĝ − δ_ε|² + λ_bd·mean|Ĝ|²`, plus the weighted symmetry
/// penalty `mean|Ĝ(r,ξ) − Ĝ(ξ,r)|²` when its weight is positive.
pub fn gaussnet_loss(net: &Mlp, op: &PdeOperator, batch: &SampleBatch, cfg: &GaussNetConfig) -> Result<LossValues> {
    let mut graph = LossGraph::new(net);
    Ok(record_gaussnet_loss(&mut graph, op, batch, cfg)?.1)
}

pub fn gaussnet_loss_and_gradient(
    net: &Mlp,
    op: &PdeOperator,
    batch: &SampleBatch,
    cfg: &GaussNetConfig,
) -> Result<(LossValues, ParamGradient)> {
    let mut graph = LossGraph::new(net);
    let (total, values) = record_gaussnet_loss(&mut graph, op, batch, cfg)?;
    Ok((values, graph.gradient(total)?))
}

pub fn train_gaussnet(domain: &Domain, op: &PdeOperator, cfg: &GaussNetConfig) -> Result<(Mlp, TrainReport)> {
    train_gaussnet_with(domain, op, cfg, &mut |_, _| {})
}

/// Uses the same batch sizes as the generalized Green's function stage.
pub fn train_gaussnet_with(
    domain: &Domain,
    op: &PdeOperator,
    cfg: &GaussNetConfig,
    progress: &mut dyn FnMut(usize, &LossValues),
) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    if op.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: op.dim() });
    }
    let train = &cfg.train;
    let mut net = train.network.build(2 * domain.dim(), train.seed)?;
    let report = optimize(
        &mut net,
        train,
        |seed| SampleBatch::generate(domain, train.n_dm, train.n_bd, MIN_PAIR_SEPARATION, seed),
        |net, batch| gaussnet_loss_and_gradient(net, op, batch, cfg),
        progress,
    )?;
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::loss_param_gradient;
    use crate::mlp::{init_mlp, Activation, LayerParams};
    use crate::quadrature::build_quadrature;

    fn tiny_config() -> GaussNetConfig {
        let mut train = TrainConfig::desk_scale();
        train.network.hidden_layers = 2;
        train.network.width = 8;
        train.n_dm = 8;
        train.n_bd = 8;
        train.epochs = 5;
        GaussNetConfig::new(train, 0.1)
    }

    #[test]
    fn delta_examples() {
        let peak = gauss_delta(&[0.3, 0.3], &[0.3, 0.3], 0.1, 2).unwrap();
        assert!((peak - 1.0 / (2.0 * PI * 0.01)).abs() < 1e-9);
        assert!((peak - 15.9154943).abs() < 1e-6);
        assert!(gauss_delta(&[0.0, 0.0], &[1.0, 0.0], 0.1, 2).unwrap() <= 1e-12);
        assert!(gauss_delta(&[0.0], &[0.0], 0.0, 1).is_err());
        assert!(gauss_delta(&[0.0], &[0.0], -1.0, 1).is_err());
    }

    #[test]
    fn delta_has_unit_mass() {
        let rule = build_quadrature(&Domain::unit_square(), 400).unwrap();
        for eps in [0.05, 0.1] {
            let mass = rule.integrate(|p| gauss_delta(p, &[0.5, 0.5], eps, 2).unwrap());
            assert!((mass - 1.0).abs() <= 1e-3, "{eps}: {mass}");
        }
    }

    #[test]
    fn zero_symmetry_weight_is_plain_loss() {
        let cfg = tiny_config();
        let op = PdeOperator::poisson(2);
        let net = init_mlp(&cfg.train.network.layer_sizes(4), Activation::Tanh, 3).unwrap();
        let batch = SampleBatch::generate(&Domain::unit_square(), 8, 8, 1e-6, 1).unwrap();
        let plain = gaussnet_loss(&net, &op, &batch, &cfg).unwrap();
        // plain loss by hand
        let mut res = 0.0;
        for row in batch.interior.rows() {
            let row = row.to_vec();
            let b = crate::autodiff::eval_with_derivatives(&net, &row).unwrap().restrict(0..2);
            res += (op.residual(&b).unwrap() - gauss_delta(&row[..2], &row[2..], 0.1, 2).unwrap()).powi(2);
        }
        let bd: f64 = batch.boundary.rows().into_iter().map(|r| net.forward(r.as_slice().unwrap()).unwrap().powi(2)).sum();
        let expected = res / 8.0 + 5.0 * bd / 8.0;
        assert!((plain.total - expected).abs() < 1e-12 * expected.max(1.0));

        let mut with_sym = cfg.clone();
        with_sym.symmetry_loss_weight = 2.0;
        let sym = gaussnet_loss(&net, &op, &batch, &with_sym).unwrap();
        let gap: f64 = batch
            .interior
            .rows()
            .into_iter()
            .map(|row| {
                let a = net.forward(&[row[0], row[1], row[2], row[3]]).unwrap();
                let b = net.forward(&[row[2], row[3], row[0], row[1]]).unwrap();
                (a - b).powi(2)
            })
            .sum::<f64>()
            / 8.0;
        assert!((sym.total - plain.total - 2.0 * gap).abs() < 1e-12);
    }

    #[test]
    fn symmetric_network_has_zero_symmetry_term() {
        // Ĝ = (x₁ + ξ₁)² is symmetric under swapping r and ξ
        let layers = vec![
            LayerParams { weights: Array2::from_shape_vec((1, 4), vec![1.0, 0.0, 1.0, 0.0]).unwrap(), bias: Array1::zeros(1) },
            LayerParams { weights: Array2::from_elem((1, 1), 1.0), bias: Array1::zeros(1) },
        ];
        let net = Mlp::from_layers(Activation::Square, layers).unwrap();
        let mut cfg = tiny_config();
        let op = PdeOperator::poisson(2);
        let batch = SampleBatch::generate(&Domain::unit_square(), 8, 8, 1e-6, 2).unwrap();
        let plain = gaussnet_loss(&net, &op, &batch, &cfg).unwrap();
        cfg.symmetry_loss_weight = 10.0;
        let with_sym = gaussnet_loss(&net, &op, &batch, &cfg).unwrap();
        assert!((with_sym.total - plain.total).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_parameter_differences() {
        let mut cfg = tiny_config();
        cfg.symmetry_loss_weight = 0.5;
        let op = PdeOperator::helmholtz(1.0, 2).unwrap();
        let net = init_mlp(&cfg.train.network.layer_sizes(4), Activation::Tanh, 4).unwrap();
        let batch = SampleBatch::generate(&Domain::unit_disk(), 8, 8, 1e-6, 3).unwrap();
        let (_, grad) = gaussnet_loss_and_gradient(&net, &op, &batch, &cfg).unwrap();
        let mut graph = LossGraph::new(&net);
        let (total, _) = record_gaussnet_loss(&mut graph, &op, &batch, &cfg).unwrap();
        assert_eq!(loss_param_gradient(&graph, total).unwrap().flat(), grad.flat());
        let theta = net.params_flat();
        let analytic = grad.flat();
        let h = 1e-6;
        for i in (0..theta.len()).step_by(5) {
            let mut tp = theta.clone();
            tp[i] += h;
            let mut plus = net.clone();
            plus.set_params_flat(&tp).unwrap();
            tp[i] -= 2.0 * h;
            let mut minus = net.clone();
            minus.set_params_flat(&tp).unwrap();
            let fd = (gaussnet_loss(&plus, &op, &batch, &cfg).unwrap().total
                - gaussnet_loss(&minus, &op, &batch, &cfg).unwrap().total)
                / (2.0 * h);
            assert!((fd - analytic[i]).abs() <= 1e-5 * fd.abs().max(1.0), "{i}: {fd} vs {}", analytic[i]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = tiny_config();
        let op = PdeOperator::poisson(2);
        let sq = Domain::unit_square();
        let (a, ra) = train_gaussnet(&sq, &op, &cfg).unwrap();
        let (b, rb) = train_gaussnet(&sq, &op, &cfg).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(ra.total, rb.total);
        let mut bad = cfg.clone();
        bad.epsilon = 0.0;
        assert!(train_gaussnet(&sq, &op, &bad).is_err());
    }
}
