//! Two-stage training: the harmonic regular part of the alternative input,
//! then the generalized Green's function driven by the composite input.

mod adam;
mod config;
mod losses;

pub use adam::{adam_step, adam_step_net, optimizer_steps_taken, AdamState, BETA1, BETA2, EPSILON};
pub use config::{NetworkConfig, TrainConfig};
pub use losses::{
    composite_t_rows, record_stage1_loss, record_stage2_loss, record_weighted_loss, singular_part_rows, stage1_loss,
    stage1_loss_and_gradient, stage2_loss, stage2_loss_and_gradient, LossValues,
};
pub(crate) use losses::operator_residuals;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::ParamGradient;
use crate::error::{Error, Result};
use crate::geometry::{Domain, SampleBatch};
use crate::mlp::Mlp;
use crate::operators::{t_singular, PdeOperator};

/// Pairs closer than this are redrawn: the composite target is unbounded at `r = ξ`.
pub const MIN_PAIR_SEPARATION: f64 = 1e-6;

/// Offset separating the batch-seed stream from the initialisation seed.
const BATCH_STREAM: u64 = 0x5851_f42d_4c95_7f2d;

/// Per-epoch losses and provenance of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub residual: Vec<f64>,
    pub boundary: Vec<f64>,
    pub total: Vec<f64>,
    pub wall_secs: f64,
    pub param_digest: String,
    pub config_digest: String,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.total.len()
    }

    pub fn final_losses(&self) -> Option<LossValues> {
        let i = self.total.len().checked_sub(1)?;
        Some(LossValues { total: self.total[i], residual: self.residual[i], boundary: self.boundary[i] })
    }

    /// Median total loss over the last tenth of training is no larger than
    /// over the first tenth.
    pub fn improved(&self) -> bool {
        let n = self.total.len();
        if n == 0 {
            return true;
        }
        let k = (n / 10).max(1);
        let median = |xs: &[f64]| {
            let mut v = xs.to_vec();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        median(&self.total[n - k..]) <= median(&self.total[..k])
    }

    /// CSV with header `epoch,residual_loss,boundary_loss,total_loss`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "residual_loss", "boundary_loss", "total_loss"])?;
        for i in 0..self.total.len() {
            w.write_record([
                i.to_string(),
                format!("{:e}", self.residual[i]),
                format!("{:e}", self.boundary[i]),
                format!("{:e}", self.total[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Runs `cfg.epochs` Adam steps. Each epoch draws a batch from `make_batch`
/// with a fresh seed (or reuses the first batch when resampling is off),
/// evaluates `loss` on it and steps once.
pub fn optimize<B>(
    net: &mut Mlp,
    cfg: &TrainConfig,
    mut make_batch: impl FnMut(u64) -> Result<B>,
    mut loss: impl FnMut(&Mlp, &B) -> Result<(LossValues, ParamGradient)>,
    progress: &mut dyn FnMut(usize, &LossValues),
) -> Result<TrainReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(BATCH_STREAM));
    let mut state = AdamState::new(net.num_params());
    let mut report = TrainReport {
        residual: Vec::with_capacity(cfg.epochs),
        boundary: Vec::with_capacity(cfg.epochs),
        total: Vec::with_capacity(cfg.epochs),
        wall_secs: 0.0,
        param_digest: String::new(),
        config_digest: cfg.digest(),
    };
    let mut fixed: Option<B> = None;
    for epoch in 0..cfg.epochs {
        let fresh;
        let batch = if cfg.resample_every_epoch {
            fresh = make_batch(seeds.gen())?;
            &fresh
        } else {
            if fixed.is_none() {
                fixed = Some(make_batch(seeds.gen())?);
            }
            fixed.as_ref().unwrap()
        };
        let (values, grad) = loss(net, batch)?;
        if !values.total.is_finite() || !grad.flat().iter().all(|g| g.is_finite()) {
            return Err(Error::Divergence { epoch, loss: values.total });
        }
        report.residual.push(values.residual);
        report.boundary.push(values.boundary);
        report.total.push(values.total);
        progress(epoch, &values);
        adam_step_net(&mut state, net, &grad, cfg.learning_rate)?;
    }
    report.wall_secs = start.elapsed().as_secs_f64();
    report.param_digest = net.digest();
    Ok(report)
}

fn no_progress(_: usize, _: &LossValues) {}

/// Trains the regular part `t̂_r(r, ξ)`: harmonic in `r`, equal to `−t_s`
/// for `r` on the boundary.
pub fn train_stage1(domain: &Domain, cfg: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    train_stage1_with(domain, cfg, &mut no_progress)
}

pub fn train_stage1_with(
    domain: &Domain,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(usize, &LossValues),
) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    let mut net = cfg.network.build(2 * domain.dim(), cfg.seed)?;
    let report = optimize(
        &mut net,
        cfg,
        |seed| SampleBatch::generate(domain, cfg.n_dm_t, cfg.n_bd_t, MIN_PAIR_SEPARATION, seed),
        |net, batch| stage1_loss_and_gradient(net, batch, cfg),
        progress,
    )?;
    Ok((net, report))
}

/// Trains the generalized Green's function `Ĝ^t` with `L_r Ĝ^t = t_s + t̂_r`
/// inside and `Ĝ^t = 0` on the boundary.
pub fn train_stage2(domain: &Domain, op: &PdeOperator, net_tr: &Mlp, cfg: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    train_stage2_with(domain, op, net_tr, cfg, &mut no_progress)
}

pub fn train_stage2_with(
    domain: &Domain,
    op: &PdeOperator,
    net_tr: &Mlp,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(usize, &LossValues),
) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    let n = domain.dim();
    if op.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: op.dim() });
    }
    net_tr.check_input(2 * n)?;
    let mut net = cfg.network.build(2 * n, cfg.seed)?;
    let report = optimize(
        &mut net,
        cfg,
        |seed| SampleBatch::generate(domain, cfg.n_dm, cfg.n_bd, MIN_PAIR_SEPARATION, seed),
        |net, batch| stage2_loss_and_gradient(net, net_tr, op, batch, cfg),
        progress,
    )?;
    Ok((net, report))
}

/// `t(r, ξ) = t_s(r, ξ) + t̂_r(r, ξ)`.
pub fn composite_t(net_tr: &Mlp, r: &[f64], xi: &[f64], dim: usize) -> Result<f64> {
    let singular = t_singular(r, xi, dim)?;
    let input: Vec<f64> = r.iter().chain(xi).copied().collect();
    Ok(singular + net_tr.forward(&input)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{eval_with_derivatives, loss_param_gradient, LossGraph};
    use crate::mlp::{init_mlp, Activation, LayerParams};
    use ndarray::{array, Array2};
    use std::f64::consts::PI;

    fn cfg(lambda_bd: f64) -> TrainConfig {
        TrainConfig { lambda_bd, ..TrainConfig::desk_scale() }
    }

    fn small_batch(count: usize, seed: u64) -> SampleBatch {
        SampleBatch::generate(&Domain::unit_square(), count, count, MIN_PAIR_SEPARATION, seed).unwrap()
    }

    #[test]
    fn stage1_arithmetic() {
        let net = Mlp::zeros(&[4, 3, 1], Activation::Tanh).unwrap();
        let d = (-0.4 * PI).exp();
        let batch = SampleBatch {
            interior: array![[0.3, 0.3, 0.6, 0.6]],
            boundary: array![[0.0, 0.5, d, 0.5]],
            seed: 0,
        };
        let v = stage1_loss(&net, &batch, &cfg(1.0)).unwrap();
        assert_eq!(v.residual, 0.0);
        assert!((v.total - 0.04).abs() < 1e-14, "{v:?}");
    }

    #[test]
    fn stage2_arithmetic() {
        let net_g = Mlp::zeros(&[4, 3, 1], Activation::Tanh).unwrap();
        let r = [0.3, 0.3];
        let xi = [0.6, 0.7];
        let ts = t_singular(&r, &xi, 2).unwrap();
        let mut layers = vec![LayerParams::zeros(4, 3), LayerParams::zeros(3, 1)];
        layers[1].bias[0] = 0.3 - ts;
        let net_tr = Mlp::from_layers(Activation::Tanh, layers).unwrap();
        let batch = SampleBatch { interior: array![[r[0], r[1], xi[0], xi[1]]], boundary: array![[0.0, 0.5, 0.5, 0.5]], seed: 0 };
        let v = stage2_loss(&net_g, &net_tr, &PdeOperator::poisson(2), &batch, &cfg(1.0)).unwrap();
        assert!((v.total - 0.09).abs() < 1e-14);
        assert_eq!(v.boundary, 0.0);
    }

    #[test]
    fn losses_match_hand_assembly() {
        let net = init_mlp(&[4, 10, 10, 1], Activation::Tanh, 3).unwrap();
        let net_tr = init_mlp(&[4, 10, 1], Activation::Tanh, 4).unwrap();
        let batch = small_batch(16, 5);
        let c = cfg(5.0);

        let mut res = 0.0;
        let mut bd = 0.0;
        for row in batch.interior.rows() {
            let b = eval_with_derivatives(&net, row.as_slice().unwrap()).unwrap();
            res += (b.hess_diag[0] + b.hess_diag[1]).powi(2);
        }
        for row in batch.boundary.rows() {
            let x = row.to_vec();
            let g = -t_singular(&x[..2], &x[2..], 2).unwrap();
            bd += (net.forward(&x).unwrap() - g).powi(2);
        }
        let expect = (res / 16.0, 5.0 * bd / 16.0);
        let v = stage1_loss(&net, &batch, &c).unwrap();
        assert!((v.residual - expect.0).abs() <= 1e-12 * expect.0.max(1.0));
        assert!((v.boundary - expect.1).abs() <= 1e-12 * expect.1.max(1.0));
        assert!((v.total - v.residual - v.boundary).abs() <= 1e-15 * v.total.max(1.0));

        let op = PdeOperator::helmholtz(1.5, 2).unwrap();
        let (mut res, mut bd) = (0.0, 0.0);
        for row in batch.interior.rows() {
            let x = row.to_vec();
            let b = eval_with_derivatives(&net, &x).unwrap().restrict(0..2);
            let t = composite_t(&net_tr, &x[..2], &x[2..], 2).unwrap();
            res += (op.residual(&b).unwrap() - t).powi(2);
        }
        for row in batch.boundary.rows() {
            bd += net.forward(row.as_slice().unwrap()).unwrap().powi(2);
        }
        let v = stage2_loss(&net, &net_tr, &op, &batch, &c).unwrap();
        assert!((v.residual - res / 16.0).abs() <= 1e-12 * (res / 16.0).max(1.0));
        assert!((v.boundary - 5.0 * bd / 16.0).abs() <= 1e-12 * (bd / 16.0).max(1.0));
    }

    #[test]
    fn boundary_weight_scales_only_boundary_part() {
        let net = init_mlp(&[4, 8, 1], Activation::Tanh, 1).unwrap();
        let batch = small_batch(8, 2);
        let a = stage1_loss(&net, &batch, &cfg(1.0)).unwrap();
        let b = stage1_loss(&net, &batch, &cfg(7.0)).unwrap();
        assert_eq!(a.residual, b.residual);
        assert!((b.boundary - 7.0 * a.boundary).abs() <= 1e-14 * b.boundary);
    }

    #[test]
    fn harmonic_regular_part_has_zero_loss() {
        // on the unit disk, the exact regular part −ln(|ξ| |r − ξ*|)/2π is
        // not representable by a small network; instead use the fact that
        // for ξ = 0 it is the constant 0 and any boundary |r| = 1 gives g = 0
        let net = Mlp::zeros(&[4, 3, 1], Activation::Tanh).unwrap();
        let batch = SampleBatch {
            interior: array![[0.2, 0.1, 0.0, 0.0], [-0.5, 0.3, 0.0, 0.0]],
            boundary: array![[1.0, 0.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0]],
            seed: 0,
        };
        let v = stage1_loss(&net, &batch, &cfg(5.0)).unwrap();
        assert!(v.total.abs() < 1e-30);
    }

    #[test]
    fn gradients_match_parameter_differences() {
        let net = init_mlp(&[4, 6, 6, 1], Activation::Tanh, 8).unwrap();
        let net_tr = init_mlp(&[4, 5, 1], Activation::Tanh, 9).unwrap();
        let batch = small_batch(8, 10);
        let c = cfg(5.0);
        let op = PdeOperator::new(crate::operators::OperatorKind::Heat, 0.0, 2).unwrap();

        let mut graph = LossGraph::new(&net);
        let (total, _) = record_stage2_loss(&mut graph, &net_tr, &op, &batch, &c).unwrap();
        let analytic = loss_param_gradient(&graph, total).unwrap().flat();
        let theta = net.params_flat();
        let h = 1e-6;
        for i in 0..theta.len() {
            let eval = |delta: f64| {
                let mut p = theta.clone();
                p[i] += delta;
                let mut n = net.clone();
                n.set_params_flat(&p).unwrap();
                stage2_loss(&n, &net_tr, &op, &batch, &c).unwrap().total
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - analytic[i]).abs() <= 1e-5 * fd.abs().max(1.0), "param {i}: {fd} vs {}", analytic[i]);
        }
    }

    fn tiny_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            network: NetworkConfig { hidden_layers: 2, width: 8, ..NetworkConfig::default() },
            n_dm: 32,
            n_bd: 32,
            n_dm_t: 32,
            n_bd_t: 32,
            epochs,
            seed: 3,
            ..TrainConfig::desk_scale()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_network() {
        let c = tiny_cfg(0);
        let (net, report) = train_stage1(&Domain::unit_disk(), &c).unwrap();
        assert_eq!(net, init_mlp(&c.network.layer_sizes(4), Activation::Tanh, 3).unwrap());
        assert_eq!(report.epochs(), 0);
        assert!(report.final_losses().is_none());
    }

    #[test]
    fn training_is_deterministic_and_improves() {
        let c = tiny_cfg(200);
        let disk = Domain::unit_disk();
        let (a, ra) = train_stage1(&disk, &c).unwrap();
        let (b, rb) = train_stage1(&disk, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.total, rb.total);
        assert_eq!(ra.epochs(), 200);
        assert!(ra.improved());

        let op = PdeOperator::poisson(2);
        let (g1, _) = train_stage2(&disk, &op, &a, &c).unwrap();
        let (g2, _) = train_stage2(&disk, &op, &a, &c).unwrap();
        assert_eq!(g1.digest(), g2.digest());
    }

    #[test]
    fn fixed_batch_mode() {
        let mut c = tiny_cfg(5);
        c.resample_every_epoch = false;
        let (_, report) = train_stage1(&Domain::unit_square(), &c).unwrap();
        assert_eq!(report.epochs(), 5);
    }

    #[test]
    fn divergence_reports_epoch() {
        let mut c = tiny_cfg(50);
        c.learning_rate = 1e300;
        match train_stage1(&Domain::unit_square(), &c) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn composite_t_examples() {
        let zero = Mlp::zeros(&[4, 2, 1], Activation::Tanh).unwrap();
        let (r, xi) = ([0.2, 0.3], [0.7, 0.1]);
        assert_eq!(composite_t(&zero, &r, &xi, 2).unwrap(), t_singular(&r, &xi, 2).unwrap());
        assert!(matches!(composite_t(&zero, &r, &r, 2), Err(Error::Singularity { .. })));
        let pairs = Array2::from_shape_vec((1, 4), vec![0.2, 0.3, 0.7, 0.1]).unwrap();
        assert_eq!(composite_t_rows(&zero, pairs.view(), 2).unwrap()[0], t_singular(&r, &xi, 2).unwrap());
    }

    #[test]
    fn report_csv() {
        let report = TrainReport {
            residual: vec![1.0, 0.5],
            boundary: vec![0.25, 0.125],
            total: vec![1.25, 0.625],
            wall_secs: 0.0,
            param_digest: String::new(),
            config_digest: String::new(),
        };
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "epoch,residual_loss,boundary_loss,total_loss");
        assert_eq!(text.lines().count(), 3);
    }
}
