//! Run configuration and the end-to-end pipelines behind the command-line
//! tool: training both stages, solving manufactured cases, method
//! benchmarks, and the seed-stability ablation.

mod benchmark;
mod config;
mod pipeline;
mod stability;

pub use benchmark::{best_by_method, cmd_benchmark, run_benchmark, write_benchmark_csv, BenchmarkRow, BENCHMARK_HEADER};
pub use config::{BenchmarkSettings, GaussNetSettings, Method, RunConfig, StabilityScenario, StabilitySettings};
pub use pipeline::{
    check_g_model, check_t_model, cmd_solve, cmd_train_g, cmd_train_t, inspect_model, model_metadata, solve_case,
    train_g_model, train_t_model, SolveResult, TrainOutput, TrainedModel, ROLE_G, ROLE_GAUSSNET, ROLE_PINN, ROLE_T,
};
pub use stability::{cmd_stability, run_stability, stability_pairs, StabilityPoint, StabilityReport};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::load_model_file;
    use crate::training::TrainConfig;

    fn tiny(epochs: usize) -> RunConfig {
        let mut cfg = RunConfig::desk_square_poisson();
        let mut train = TrainConfig::desk_scale();
        train.network.hidden_layers = 2;
        train.network.width = 8;
        train.n_dm = 16;
        train.n_bd = 16;
        train.n_dm_t = 16;
        train.n_bd_t = 16;
        train.epochs = epochs;
        cfg.train = train;
        cfg.train_t = None;
        cfg.quadrature_resolution = 8;
        cfg.eval_grid_n = 4;
        cfg.stability.grid_n = 2;
        cfg
    }

    #[test]
    fn train_solve_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(3);
        let t = cmd_train_t(&cfg, dir.path(), &mut |_, _| {}).unwrap();
        assert!(t.model_path.exists() && t.report_path.exists());
        let g = cmd_train_g(&cfg, &t.model_path, dir.path(), &mut |_, _| {}).unwrap();
        let (result, csv) = cmd_solve(&cfg, &g.model_path, None, None, dir.path()).unwrap();
        assert!(csv.exists());
        assert_eq!(result.points.nrows(), 16);
        assert!(result.relative_l2.is_finite());
        let text = inspect_model(&g.model_path).unwrap();
        assert!(text.contains("role: g_t"));
        let (_, meta) = load_model_file(&g.model_path).unwrap();
        assert_eq!(meta.notes["t_model_digest"], t.model.net.digest());
    }

    #[test]
    fn mismatched_models_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut disk_cfg = tiny(1);
        disk_cfg.domain = crate::geometry::DomainSpec::Circle { center: [0.0, 0.0], radius: 1.0 };
        disk_cfg.case = None;
        let t = cmd_train_t(&disk_cfg, dir.path(), &mut |_, _| {}).unwrap();
        let square_cfg = tiny(1);
        assert!(matches!(cmd_train_g(&square_cfg, &t.model_path, dir.path(), &mut |_, _| {}), Err(crate::Error::Config(_))));
        // a regular-part model is not a kernel
        assert!(cmd_solve(&square_cfg, &t.model_path, None, None, dir.path()).is_err());
        assert!(cmd_solve(&square_cfg, &dir.path().join("missing.dggf"), None, None, dir.path()).is_err());
    }

    #[test]
    fn zero_laplacian_case_flags_zero_density() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(1);
        cfg.domain = crate::geometry::DomainSpec::Circle { center: [0.0, 0.0], radius: 1.0 };
        cfg.case = Some("poisson_disk_paraboloid".into());
        let t = cmd_train_t(&cfg, dir.path(), &mut |_, _| {}).unwrap();
        let g = cmd_train_g(&cfg, &t.model_path, dir.path(), &mut |_, _| {}).unwrap();
        let (result, _) = cmd_solve(&cfg, &g.model_path, None, None, dir.path()).unwrap();
        assert!(result.zero_density);
        assert!(result.u_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn benchmark_rows_and_unsupported_ngf() {
        let mut cfg = tiny(2);
        cfg.benchmark.domains = vec![
            crate::geometry::DomainSpec::Square { origin: [0.0, 0.0], side: 1.0 },
            crate::geometry::DomainSpec::Circle { center: [0.0, 0.0], radius: 1.0 },
        ];
        cfg.benchmark.ngf_grid_n = 16;
        let rows = run_benchmark(&cfg, &mut |_| {}).unwrap();
        // square: dggf, pinn, 2 gaussnet, ngf; circle: same with ngf unsupported
        assert_eq!(rows.len(), 10);
        let ngf_circle = rows.iter().find(|r| r.method == "ngf" && r.domain == "CR").unwrap();
        assert_eq!(ngf_circle.status, "unsupported");
        assert!(rows.iter().filter(|r| r.method != "ngf" || r.domain == "SQ").all(|r| r.status == "ok"), "{rows:?}");
        let again = run_benchmark(&cfg, &mut |_| {}).unwrap();
        let strip = |rows: &[BenchmarkRow]| -> Vec<(String, String, Option<f64>)> {
            rows.iter().map(|r| (r.method.clone(), r.domain.clone(), r.relative_l2)).collect()
        };
        assert_eq!(strip(&rows), strip(&again));
    }

    #[test]
    fn stability_needs_two_seeds_and_reports_finite_spread() {
        let cfg = tiny(2);
        assert!(run_stability(&cfg, 1, StabilityScenario::Stage2Only, &mut |_, _| {}).is_err());
        let report = run_stability(&cfg, 2, StabilityScenario::Stage2Only, &mut |_, _| {}).unwrap();
        assert_eq!(report.t_models.len(), 1);
        assert_eq!(report.g_models.len(), 2);
        assert_eq!(report.points.len(), 16);
        assert!(report.all_finite());
        for p in &report.points {
            // bias-variance split: the spread never exceeds the mean squared error
            assert!(p.variance <= p.mean_squared_error * (1.0 + 1e-12) + 1e-300);
            assert!(p.mean_abs_error.powi(2) <= p.mean_squared_error * (1.0 + 1e-12) + 1e-300);
        }
        let both = run_stability(&cfg, 2, StabilityScenario::BothStages, &mut |_, _| {}).unwrap();
        assert_eq!(both.t_models.len(), 2);
    }
}
