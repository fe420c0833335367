use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{Method, RunConfig};
use super::pipeline::{solve_case, train_g_model, train_t_model, TrainedModel};
use crate::baselines::{ngf_solve, train_gaussnet, train_pinn, GaussNetConfig};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::operators::PdeOperator;
use crate::oracles::{manufactured_catalog, relative_l2, ManufacturedCase};
use crate::quadrature::{build_quadrature, convolve, interior_grid};

/// One (method, operator, domain, case, seed) result.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub method: String,
    pub operator: String,
    pub domain: String,
    pub case: String,
    pub seed: u64,
    pub relative_l2: Option<f64>,
    pub train_secs: f64,
    pub solve_secs: f64,
    /// `ok`, `unsupported`, or `error: …`.
    pub status: String,
}

pub const BENCHMARK_HEADER: [&str; 9] =
    ["method", "operator", "domain", "case", "seed", "relative_l2", "train_secs", "solve_secs", "status"];

pub fn write_benchmark_csv(rows: &[BenchmarkRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BENCHMARK_HEADER)?;
    for row in rows {
        w.write_record([
            row.method.clone(),
            row.operator.clone(),
            row.domain.clone(),
            row.case.clone(),
            row.seed.to_string(),
            row.relative_l2.map(|e| format!("{e:e}")).unwrap_or_default(),
            format!("{:.3}", row.train_secs),
            format!("{:.4}", row.solve_secs),
            row.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Cases benchmarked for one operator/domain pair.
fn cases_for(cfg: &RunConfig, op: &PdeOperator, domain: &Domain) -> Vec<ManufacturedCase> {
    let matching = manufactured_catalog().into_iter().filter(|c| &c.operator == op && &c.domain == domain);
    if cfg.benchmark.cases.is_empty() {
        matching.filter(|c| !c.needs_boundary_term).take(1).collect()
    } else {
        matching.filter(|c| cfg.benchmark.cases.contains(&c.name)).collect()
    }
}

struct RowContext<'a> {
    operator: String,
    domain: &'a Domain,
    seed: u64,
}

impl RowContext<'_> {
    fn row(&self, method: &str, case: &str, outcome: Result<(f64, f64, f64)>) -> BenchmarkRow {
        let (relative_l2, train_secs, solve_secs, status) = match outcome {
            Ok((err, train, solve)) => (Some(err), train, solve, "ok".to_string()),
            Err(Error::Unsupported(_)) => (None, 0.0, 0.0, "unsupported".to_string()),
            Err(e) => (None, 0.0, 0.0, format!("error: {e}")),
        };
        BenchmarkRow {
            method: method.to_string(),
            operator: self.operator.clone(),
            domain: self.domain.kind().short_name().to_string(),
            case: case.to_string(),
            seed: self.seed,
            relative_l2,
            train_secs,
            solve_secs,
            status,
        }
    }
}

/// Runs every selected method with the same network, optimizer, epochs and
/// batch sizes. Failures are recorded per row and the suite continues.
pub fn run_benchmark(cfg: &RunConfig, on_row: &mut dyn FnMut(&BenchmarkRow)) -> Result<Vec<BenchmarkRow>> {
    cfg.validate()?;
    let operators = if cfg.benchmark.operators.is_empty() { vec![cfg.operator.clone()] } else { cfg.benchmark.operators.clone() };
    let domains = if cfg.benchmark.domains.is_empty() { vec![cfg.domain.clone()] } else { cfg.benchmark.domains.clone() };
    let mut rows = Vec::new();
    let mut emit = |row: BenchmarkRow, rows: &mut Vec<BenchmarkRow>| {
        on_row(&row);
        rows.push(row);
    };
    for domain_spec in &domains {
        let domain = Domain::new(domain_spec.clone())?;
        let rule = build_quadrature(&domain, cfg.quadrature_resolution)?;
        let points = interior_grid(&domain, cfg.eval_grid_n)?;
        for &seed in &cfg.benchmark.seeds {
            let mut t_model: Option<std::result::Result<(TrainedModel, f64), String>> = None;
            for op_spec in &operators {
                let op = PdeOperator::from_spec(op_spec, domain.dim())?;
                let mut run = cfg.clone().with_seed(seed);
                run.domain = domain_spec.clone();
                run.operator = op_spec.clone();
                run.case = None;
                let ctx = RowContext { operator: op.id(), domain: &domain, seed };
                let cases = cases_for(cfg, &op, &domain);
                if cases.is_empty() {
                    emit(ctx.row("all", "-", Err(Error::Config("no manufactured case for this operator and domain".into()))), &mut rows);
                    continue;
                }
                for method in &cfg.benchmark.methods {
                    match method {
                        Method::Dggf => {
                            let t = t_model.get_or_insert_with(|| {
                                let start = Instant::now();
                                train_t_model(&run, &mut |_, _| {})
                                    .map(|m| (m, start.elapsed().as_secs_f64()))
                                    .map_err(|e| e.to_string())
                            });
                            let outcome = t.clone().map_err(Error::Config).and_then(|(t, t_secs)| {
                                let start = Instant::now();
                                let g = train_g_model(&run, &t.net, &t.metadata, &mut |_, _| {})?;
                                Ok((g, t_secs + start.elapsed().as_secs_f64()))
                            });
                            for case in &cases {
                                let result = match &outcome {
                                    Ok((g, secs)) => solve_case(&g.net, case, &rule, &points).map(|s| (s.relative_l2, *secs, s.convolution_secs)),
                                    Err(e) => Err(Error::Config(e.to_string())),
                                };
                                emit(ctx.row("dggf", &case.name, result), &mut rows);
                            }
                        }
                        Method::Pinn => {
                            for case in &cases {
                                let result = (|| {
                                    let start = Instant::now();
                                    let (net, _) = train_pinn(&case.problem(), &run.pinn_train())?;
                                    let train_secs = start.elapsed().as_secs_f64();
                                    let start = Instant::now();
                                    let u_hat = net.forward_batch(points.view())?;
                                    let solve_secs = start.elapsed().as_secs_f64();
                                    let u_ref: Vec<f64> = points.rows().into_iter().map(|p| (case.u)(p.as_slice().unwrap())).collect();
                                    Ok((relative_l2(u_hat.as_slice().unwrap(), &u_ref)?, train_secs, solve_secs))
                                })();
                                emit(ctx.row("pinn", &case.name, result), &mut rows);
                            }
                        }
                        Method::Gaussnet => {
                            for &eps in &cfg.gaussnet.epsilons {
                                let gcfg = GaussNetConfig {
                                    train: run.gaussnet_train(),
                                    epsilon: eps,
                                    symmetry_loss_weight: cfg.gaussnet.symmetry_loss_weight,
                                };
                                let start = Instant::now();
                                let trained = train_gaussnet(&domain, &op, &gcfg);
                                let train_secs = start.elapsed().as_secs_f64();
                                for case in &cases {
                                    let result = match &trained {
                                        Ok((net, _)) => (|| {
                                            // this kernel inverts L itself, so it is convolved with f
                                            let start = Instant::now();
                                            let u_hat = convolve(net, &rule, &*case.f, points.view())?;
                                            let solve_secs = start.elapsed().as_secs_f64();
                                            let u_ref: Vec<f64> = points.rows().into_iter().map(|p| (case.u)(p.as_slice().unwrap())).collect();
                                            Ok((relative_l2(u_hat.as_slice().unwrap(), &u_ref)?, train_secs, solve_secs))
                                        })(),
                                        Err(e) => Err(Error::Config(e.to_string())),
                                    };
                                    emit(ctx.row(&format!("gaussnet(eps={eps})"), &case.name, result), &mut rows);
                                }
                            }
                        }
                        Method::Ngf => {
                            let start = Instant::now();
                            let ngf = ngf_solve(&domain, &op, cfg.benchmark.ngf_grid_n);
                            let train_secs = start.elapsed().as_secs_f64();
                            for case in &cases {
                                let result = match &ngf {
                                    Ok(ngf) => (|| {
                                        let start = Instant::now();
                                        let u_hat = ngf.solve(&*case.f);
                                        let solve_secs = start.elapsed().as_secs_f64();
                                        let u_ref: Vec<f64> = ngf.nodes.rows().into_iter().map(|p| (case.u)(p.as_slice().unwrap())).collect();
                                        Ok((relative_l2(u_hat.as_slice().unwrap(), &u_ref)?, train_secs, solve_secs))
                                    })(),
                                    Err(Error::Unsupported(m)) => Err(Error::Unsupported(m.clone())),
                                    Err(e) => Err(Error::Config(e.to_string())),
                                };
                                emit(ctx.row("ngf", &case.name, result), &mut rows);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Runs the benchmark and writes `benchmark.csv` into `out`.
pub fn cmd_benchmark(cfg: &RunConfig, out: &Path, on_row: &mut dyn FnMut(&BenchmarkRow)) -> Result<(Vec<BenchmarkRow>, PathBuf)> {
    let rows = run_benchmark(cfg, on_row)?;
    fs::create_dir_all(out)?;
    let path = out.join("benchmark.csv");
    write_benchmark_csv(&rows, &path)?;
    Ok((rows, path))
}

/// Best error per method over rows with status `ok`.
pub fn best_by_method(rows: &[BenchmarkRow]) -> BTreeMap<String, f64> {
    let mut best = BTreeMap::new();
    for row in rows {
        if let Some(err) = row.relative_l2 {
            let entry = best.entry(row.method.clone()).or_insert(f64::INFINITY);
            *entry = f64::min(*entry, err);
        }
    }
    best
}
