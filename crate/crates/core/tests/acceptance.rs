//! Acceptance gate: criteria 1 to 11, run in sequence with one PASS/FAIL line each.
//!
//! The training-heavy criteria share runs: one square regular-part model and
//! five kernels (the stability ablation) feed criteria 5, 6, 7, 9 and 11.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dggf_core::autodiff::{eval_with_derivatives, finite_difference_check};
use dggf_core::baselines::{ngf_solve, train_gaussnet, GaussNetConfig};
use dggf_core::experiments::{run_stability, solve_case, RunConfig, StabilityScenario};
use dggf_core::geometry::{lhs, sample_interior, Domain, SampleBatch};
use dggf_core::mlp::{init_mlp, load_model, save_model, Activation, LayerParams, Mlp, ModelMetadata};
use dggf_core::operators::PdeOperator;
use dggf_core::oracles::{case_by_name, disk_green_analytic, quadratic_family, relative_l2};
use dggf_core::quadrature::{build_quadrature, construct_solution, convolve, interior_grid};
use dggf_core::training::{
    composite_t, optimizer_steps_taken, stage1_loss, stage1_loss_and_gradient, stage2_loss, stage2_loss_and_gradient,
    train_stage1, TrainConfig, MIN_PAIR_SEPARATION,
};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn record(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let line = format!("criterion {id:>2} [{verdict}] {name}: {detail}\n");
        // bypasses the test harness capture so the verdicts always show
        let mut out = std::io::stdout();
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
        if !pass {
            self.failures.push(line);
        }
    }
}

fn relative_vector_error(approx: &[f64], exact: &[f64]) -> f64 {
    let diff: f64 = approx.iter().zip(exact).map(|(a, e)| (a - e).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = exact.iter().map(|e| e * e).sum::<f64>().sqrt();
    diff / norm
}

/// One hidden layer of squares: `Σ_k a_k (w_k·x + b_k)² + c`, whose
/// Laplacian is `Σ_k 2 a_k |w_k|²` everywhere.
fn square_net(rng: &mut ChaCha8Rng, dim: usize, width: usize) -> (Mlp, f64) {
    let weights = Array2::from_shape_fn((width, dim), |_| rng.gen_range(-1.5..1.5));
    let bias = (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let out_w = Array2::from_shape_fn((1, width), |_| rng.gen_range(-1.0..1.0));
    let laplacian = (0..width)
        .map(|k| 2.0 * out_w[[0, k]] * weights.row(k).iter().map(|w| w * w).sum::<f64>())
        .sum();
    let hidden = LayerParams { weights, bias };
    let out = LayerParams { weights: out_w, bias: ndarray::array![rng.gen_range(-1.0..1.0)] };
    (Mlp::from_layers(Activation::Square, vec![hidden, out]).unwrap(), laplacian)
}

fn autodiff_exactness(gate: &mut Gate) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_fd: f64 = 0.0;
    for trial in 0..100 {
        let dim = rng.gen_range(1..=4);
        let depth = rng.gen_range(1..=4);
        let mut sizes = vec![dim];
        sizes.extend((0..depth).map(|_| rng.gen_range(2..=32)));
        sizes.push(1);
        let net = init_mlp(&sizes, Activation::Tanh, 1000 + trial).unwrap();
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst_fd = worst_fd.max(finite_difference_check(&net, &x, 1e-4).unwrap().max());
    }
    let mut worst_poly: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.gen_range(1..=4);
        let width = rng.gen_range(1..=16);
        let (net, laplacian) = square_net(&mut rng, dim, width);
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = eval_with_derivatives(&net, &x).unwrap().laplacian();
        worst_poly = worst_poly.max((got - laplacian).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    gate.record(
        1,
        "autodiff exactness",
        worst_fd <= 1e-5 && worst_poly <= 1e-9 && secs < 10.0,
        format!("max FD discrepancy {worst_fd:.2e} (≤ 1e-5), polynomial Laplacian error {worst_poly:.2e} (≤ 1e-9), {secs:.2} s (< 10 s)"),
    );
}

/// Central differences of `loss` over every parameter of `net`.
fn parameter_fd(net: &Mlp, loss: impl Fn(&Mlp) -> f64, step: f64) -> Vec<f64> {
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut params = base.clone();
    (0..base.len())
        .map(|i| {
            params[i] = base[i] + step;
            probe.set_params_flat(&params).unwrap();
            let up = loss(&probe);
            params[i] = base[i] - step;
            probe.set_params_flat(&params).unwrap();
            let down = loss(&probe);
            params[i] = base[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn loss_gradient_correctness(gate: &mut Gate) {
    let start = Instant::now();
    let cfg = TrainConfig::desk_scale();
    let op = PdeOperator::helmholtz(1.0, 2).unwrap();
    let mut worst: f64 = 0.0;
    for (k, domain) in [Domain::unit_square(), Domain::unit_disk()].into_iter().enumerate() {
        let batch = SampleBatch::generate(&domain, 8, 8, MIN_PAIR_SEPARATION, 40 + k as u64).unwrap();
        let sizes = [4, 24, 24, 24, 1];
        let net_tr = init_mlp(&sizes, Activation::Tanh, 7 + k as u64).unwrap();
        let net_g = init_mlp(&sizes, Activation::Tanh, 9 + k as u64).unwrap();

        let (_, grad) = stage1_loss_and_gradient(&net_tr, &batch, &cfg).unwrap();
        let fd = parameter_fd(&net_tr, |n| stage1_loss(n, &batch, &cfg).unwrap().total, 1e-5);
        worst = worst.max(relative_vector_error(&fd, &grad.flat()));

        let (_, grad) = stage2_loss_and_gradient(&net_g, &net_tr, &op, &batch, &cfg).unwrap();
        let fd = parameter_fd(&net_g, |n| stage2_loss(n, &net_tr, &op, &batch, &cfg).unwrap().total, 1e-5);
        worst = worst.max(relative_vector_error(&fd, &grad.flat()));
    }
    let secs = start.elapsed().as_secs_f64();
    gate.record(
        2,
        "loss-gradient correctness",
        worst <= 1e-5 && secs < 60.0,
        format!("max relative error {worst:.2e} (≤ 1e-5), {secs:.1} s (< 60 s)"),
    );
}

fn lhs_stratification(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 1000;
    let mut violations = 0;
    for _ in 0..trials {
        let count = rng.gen_range(1..=200);
        let dim = rng.gen_range(1..=6);
        let seed = rng.gen();
        let samples = lhs(count, dim, seed).unwrap();
        for column in samples.columns() {
            let mut seen = vec![false; count];
            for &v in column {
                let stratum = (v * count as f64).floor() as usize;
                if !(0.0..1.0).contains(&v) || seen[stratum] {
                    violations += 1;
                    break;
                }
                seen[stratum] = true;
            }
        }
    }
    gate.record(3, "LHS stratification", violations == 0, format!("{violations} violating columns over {trials} trials"));
}

fn disk_stage1_oracle(gate: &mut Gate) -> Vec<(Mlp, ModelMetadata)> {
    let mut cfg = TrainConfig::desk_scale();
    cfg.epochs = 20_000;
    cfg.n_dm_t = 2000;
    cfg.n_bd_t = 2000;
    cfg.lambda_bd = 5.0;
    let disk = Domain::unit_disk();
    let start = Instant::now();
    let (net, _) = train_stage1(&disk, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();

    let r = sample_interior(&disk, 8000, 77).unwrap();
    let xi = sample_interior(&disk, 8000, 78).unwrap();
    let mut errors = Vec::with_capacity(2000);
    for (r, xi) in r.rows().into_iter().zip(xi.rows()) {
        let (r, xi) = (r.to_vec(), xi.to_vec());
        if ((r[0] - xi[0]).powi(2) + (r[1] - xi[1]).powi(2)).sqrt() < 0.1 {
            continue;
        }
        errors.push((composite_t(&net, &r, &xi, 2).unwrap() - disk_green_analytic(&r, &xi).unwrap()).abs());
        if errors.len() == 2000 {
            break;
        }
    }
    let mae = errors.iter().sum::<f64>() / errors.len() as f64;
    gate.record(
        4,
        "stage-1 disk oracle",
        errors.len() == 2000 && mae <= 5e-2 && secs <= 1800.0,
        format!("MAE {mae:.3e} over {} pairs (≤ 5e-2), training {:.1} min (≤ 30 min)", errors.len(), secs / 60.0),
    );
    let meta = ModelMetadata { role: "t_regular".into(), coord_dim: 2, domain_id: disk.id().into(), ..Default::default() };
    vec![(net, meta)]
}

fn ngf_oracle(gate: &mut Gate) {
    let case = case_by_name("poisson_square_sin11").unwrap();
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let ngf = ngf_solve(&case.domain, &case.operator, n).unwrap();
            let u_hat = ngf.solve(&*case.f);
            let u_ref: Vec<f64> = ngf.nodes.rows().into_iter().map(|p| (case.u)(p.as_slice().unwrap())).collect();
            relative_l2(u_hat.as_slice().unwrap(), &u_ref).unwrap()
        })
        .collect();
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    gate.record(
        8,
        "NGF oracle",
        errors[2] <= 1e-3 && ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!("error at 64 {:.3e} (≤ 1e-3), ratios 16→32→64 {:.3} {:.3} (in [3.5, 4.5])", errors[2], ratios[0], ratios[1]),
    );
}

fn quadrature_checks(gate: &mut Gate) {
    let square = Domain::unit_square();
    let rule = build_quadrature(&square, 37).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let got = rule.integrate(|p| c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * p[0] * p[1]);
        let exact = c[0] + c[1] / 2.0 + c[2] / 2.0 + c[3] / 4.0;
        worst = worst.max((got - exact).abs());
    }
    let disk = Domain::unit_disk();
    let area_errors: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&res| (build_quadrature(&disk, res).unwrap().total_weight() - std::f64::consts::PI).abs())
        .collect();
    let ratios: Vec<f64> = area_errors.windows(2).map(|w| w[0] / w[1]).collect();
    gate.record(
        10,
        "quadrature",
        worst <= 1e-12 && ratios.iter().all(|&r| r >= 1.6),
        format!(
            "bilinear error {worst:.2e} (≤ 1e-12), circle-area error ratios 50→400 {:.2} {:.2} {:.2} (≥ 1.6)",
            ratios[0], ratios[1], ratios[2]
        ),
    );
}

fn round_trip_identical(net: &Mlp, meta: &ModelMetadata) -> bool {
    let bytes = save_model(net, meta);
    let (loaded, loaded_meta) = load_model(&bytes).unwrap();
    let same_bits = net.params_flat().iter().zip(loaded.params_flat()).all(|(a, b)| a.to_bits() == b.to_bits());
    same_bits
        && loaded.layer_sizes() == net.layer_sizes()
        && loaded.activation() == net.activation()
        && &loaded_meta == meta
        && save_model(&loaded, &loaded_meta) == bytes
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate { failures: Vec::new() };
    autodiff_exactness(&mut gate);
    loss_gradient_correctness(&mut gate);
    lhs_stratification(&mut gate);
    ngf_oracle(&mut gate);
    quadrature_checks(&mut gate);
    let mut persisted = disk_stage1_oracle(&mut gate);

    // one shared regular part, five kernels (seeds 0..5)
    let cfg = RunConfig::desk_square_poisson();
    let report = run_stability(&cfg, 5, StabilityScenario::Stage2Only, &mut |seed, stage| {
        eprintln!("[acceptance] seed {seed}: training {stage}");
    })
    .unwrap();
    let domain = cfg.domain().unwrap();
    let op = cfg.pde_operator().unwrap();
    let rule = build_quadrature(&domain, cfg.quadrature_resolution).unwrap();
    let points = interior_grid(&domain, cfg.eval_grid_n).unwrap();
    let kernel = &report.g_models[0];

    let case = case_by_name("poisson_square_sin11").unwrap();
    let dggf = solve_case(&kernel.net, &case, &rule, &points).unwrap();
    gate.record(
        5,
        "end-to-end Poisson square",
        dggf.relative_l2 <= 5e-2,
        format!("relative L2 {:.3e} (≤ 5e-2; full-scale reference 1.13e-3)", dggf.relative_l2),
    );

    let mut gaussnet_errors = Vec::new();
    for epsilon in [0.05, 0.1] {
        let (net, _) = train_gaussnet(&domain, &op, &GaussNetConfig::new(cfg.gaussnet_train(), epsilon)).unwrap();
        let u_hat = convolve(&net, &rule, &*case.f, points.view()).unwrap();
        let err = relative_l2(u_hat.as_slice().unwrap(), dggf.u_ref.as_slice().unwrap()).unwrap();
        gaussnet_errors.push(err);
        let meta = ModelMetadata { role: "gaussnet".into(), coord_dim: 2, domain_id: domain.id().into(), ..Default::default() };
        persisted.push((net, meta));
    }
    gate.record(
        6,
        "method ranking",
        gaussnet_errors.iter().all(|&g| 3.0 * dggf.relative_l2 <= g),
        format!(
            "DGGF {:.3e} vs GaussNet eps=0.05 {:.3e}, eps=0.1 {:.3e} (factor ≥ 3)",
            dggf.relative_l2, gaussnet_errors[0], gaussnet_errors[1]
        ),
    );

    let steps_before = optimizer_steps_taken();
    let mut solve_secs = Vec::new();
    for (a, b) in [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (2, 3), (3, 2), (3, 3)] {
        let case = case_by_name(&format!("poisson_square_sin{a}{b}")).unwrap();
        solve_secs.push(solve_case(&kernel.net, &case, &rule, &points).unwrap().convolution_secs);
    }
    let quadratic = &quadratic_family(1, 5)[0];
    let lap = quadratic.laplacian();
    let start = Instant::now();
    construct_solution(&kernel.net, &rule, &|_| lap, points.view()).unwrap();
    solve_secs.push(start.elapsed().as_secs_f64());
    let steps = optimizer_steps_taken() - steps_before;
    let slowest = solve_secs.iter().copied().fold(0.0, f64::max);
    // the kernel is usable only after both stages
    let train_secs = report.t_models[0].report.wall_secs + kernel.report.wall_secs;
    gate.record(
        7,
        "reusability",
        steps == 0 && solve_secs.len() == 10 && 100.0 * slowest <= train_secs,
        format!("{steps} training steps over 10 solves, slowest solve {slowest:.4} s vs two-stage training {train_secs:.1} s (≥ 100×)"),
    );

    gate.record(
        9,
        "stability ablation",
        report.variance_within_error(),
        format!(
            "max per-point variance {:.3e} ≤ squared mean error {:.3e}, all finite: {}",
            report.max_variance(),
            report.mean_abs_error().powi(2),
            report.all_finite()
        ),
    );

    persisted.extend(report.t_models.iter().chain(&report.g_models).map(|m| (m.net.clone(), m.metadata.clone())));
    let all_identical = persisted.iter().all(|(net, meta)| round_trip_identical(net, meta));
    let batch = SampleBatch::generate(&domain, 64, 64, MIN_PAIR_SEPARATION, 99).unwrap();
    let t_net = &report.t_models[0].net;
    let loss_identical = report.g_models.iter().all(|g| {
        let before = stage2_loss(&g.net, t_net, &op, &batch, &cfg.train).unwrap();
        let (loaded, _) = load_model(&save_model(&g.net, &g.metadata)).unwrap();
        let after = stage2_loss(&loaded, t_net, &op, &batch, &cfg.train).unwrap();
        before.total.to_bits() == after.total.to_bits()
    });
    gate.record(
        11,
        "persistence",
        all_identical && loss_identical,
        format!("{} models bit-identical: {all_identical}, stage-2 loss identical: {loss_identical}", persisted.len()),
    );

    assert!(gate.failures.is_empty(), "failed criteria:\n{}", gate.failures.concat());
}
