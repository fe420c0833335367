use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};

use super::pipeline::{train_g_model, train_t_model, TrainedModel};
use super::{RunConfig, StabilityScenario};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::operators::PdeOperator;
use crate::oracles::square_generalized_green;
use crate::quadrature::interior_grid;

/// Modes per axis in the eigen-expansion reference.
const REFERENCE_TERMS: usize = 200;

/// Seed-to-seed spread of the kernel at one `(r, ξ)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityPoint {
    pub r: Vec<f64>,
    pub xi: Vec<f64>,
    pub reference: f64,
    pub mean_prediction: f64,
    /// Population variance over seeds of the kernel value (equivalently of its
    /// error, the reference being fixed).
    pub variance: f64,
    /// Mean over seeds of the absolute error.
    pub mean_abs_error: f64,
    /// Mean over seeds of the squared error.
    pub mean_squared_error: f64,
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub scenario: StabilityScenario,
    pub seeds: Vec<u64>,
    pub points: Vec<StabilityPoint>,
    pub t_models: Vec<TrainedModel>,
    pub g_models: Vec<TrainedModel>,
}

impl StabilityReport {
    pub fn max_variance(&self) -> f64 {
        self.points.iter().map(|p| p.variance).fold(0.0, f64::max)
    }

    /// Squared error averaged over every point and seed.
    pub fn mean_squared_error(&self) -> f64 {
        self.points.iter().map(|p| p.mean_squared_error).sum::<f64>() / self.points.len() as f64
    }

    /// Absolute error averaged over every point and seed.
    pub fn mean_abs_error(&self) -> f64 {
        self.points.iter().map(|p| p.mean_abs_error).sum::<f64>() / self.points.len() as f64
    }

    /// True when no point's seed-to-seed variance exceeds the square of the
    /// mean error.
    pub fn variance_within_error(&self) -> bool {
        self.all_finite() && self.max_variance() <= self.mean_abs_error().powi(2)
    }

    pub fn all_finite(&self) -> bool {
        self.points.iter().all(|p| p.variance.is_finite() && p.mean_squared_error.is_finite())
    }

    /// CSV with header
    /// `r0,…,xi0,…,reference,mean_prediction,variance,mean_abs_error,mean_squared_error`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let dim = self.points.first().map_or(0, |p| p.r.len());
        let mut header: Vec<String> = (0..dim).map(|k| format!("r{k}")).collect();
        header.extend((0..dim).map(|k| format!("xi{k}")));
        header.extend(
            ["reference", "mean_prediction", "variance", "mean_abs_error", "mean_squared_error"].map(String::from),
        );
        w.write_record(&header)?;
        for p in &self.points {
            let mut record: Vec<String> = p.r.iter().chain(&p.xi).map(|v| format!("{v:e}")).collect();
            for v in [p.reference, p.mean_prediction, p.variance, p.mean_abs_error, p.mean_squared_error] {
                record.push(format!("{v:e}"));
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Every `(r, ξ)` combination of an `grid_n`-per-axis interior grid, one per row.
pub fn stability_pairs(domain: &Domain, grid_n: usize) -> Result<Array2<f64>> {
    let grid = interior_grid(domain, grid_n)?;
    let (m, n) = grid.dim();
    let mut pairs = Array2::zeros((m * m, 2 * n));
    for i in 0..m {
        for j in 0..m {
            pairs.slice_mut(s![i * m + j, ..n]).assign(&grid.row(i));
            pairs.slice_mut(s![i * m + j, n..]).assign(&grid.row(j));
        }
    }
    Ok(pairs)
}

/// Trains `n_seeds` kernels (seeds `base, base+1, …`) and measures their
/// per-point spread against the eigen-expansion reference on the unit square.
pub fn run_stability(
    cfg: &RunConfig,
    n_seeds: usize,
    scenario: StabilityScenario,
    on_stage: &mut dyn FnMut(u64, &str),
) -> Result<StabilityReport> {
    cfg.validate()?;
    if n_seeds < 2 {
        return Err(Error::InvalidArgument(format!("stability needs at least 2 seeds, got {n_seeds}")));
    }
    let domain = cfg.domain()?;
    if domain != Domain::unit_square() {
        return Err(Error::Unsupported("stability reference is only available on the unit square".into()));
    }
    let op: PdeOperator = cfg.pde_operator()?;
    let pairs = stability_pairs(&domain, cfg.stability.grid_n)?;
    let reference = pairs
        .rows()
        .into_iter()
        .map(|row| square_generalized_green(&op, &[row[0], row[1]], &[row[2], row[3]], REFERENCE_TERMS))
        .collect::<Result<Vec<f64>>>()?;

    let base = cfg.train.seed;
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| base + k).collect();
    let mut t_models = Vec::new();
    let mut g_models = Vec::new();
    let mut predictions = Vec::new();
    for &seed in &seeds {
        let run = cfg.clone().with_seed(seed);
        if t_models.is_empty() || scenario == StabilityScenario::BothStages {
            on_stage(seed, "t");
            t_models.push(train_t_model(&run, &mut |_, _| {})?);
        }
        let t = t_models.last().unwrap();
        on_stage(seed, "g");
        let g = train_g_model(&run, &t.net, &t.metadata, &mut |_, _| {})?;
        predictions.push(g.net.forward_batch(pairs.view())?);
        g_models.push(g);
    }

    let count = seeds.len() as f64;
    let points = pairs
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let values: Vec<f64> = predictions.iter().map(|p| p[i]).collect();
            let mean = values.iter().sum::<f64>() / count;
            let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            let mae = values.iter().map(|v| (v - reference[i]).abs()).sum::<f64>() / count;
            let mse = values.iter().map(|v| (v - reference[i]).powi(2)).sum::<f64>() / count;
            StabilityPoint {
                r: row.slice(s![..2]).to_vec(),
                xi: row.slice(s![2..]).to_vec(),
                reference: reference[i],
                mean_prediction: mean,
                variance,
                mean_abs_error: mae,
                mean_squared_error: mse,
            }
        })
        .collect();
    Ok(StabilityReport { scenario, seeds, points, t_models, g_models })
}

/// Runs the ablation and writes `stability.csv` into `out`.
pub fn cmd_stability(
    cfg: &RunConfig,
    n_seeds: usize,
    scenario: StabilityScenario,
    out: &Path,
    on_stage: &mut dyn FnMut(u64, &str),
) -> Result<(StabilityReport, PathBuf)> {
    let report = run_stability(cfg, n_seeds, scenario, on_stage)?;
    fs::create_dir_all(out)?;
    let path = out.join("stability.csv");
    report.write_csv(&path)?;
    Ok((report, path))
}
