use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};

use super::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::mlp::{load_model_file, save_model_file, Mlp, ModelMetadata};
use crate::operators::PdeOperator;
use crate::oracles::{case_by_name, relative_l2, ManufacturedCase};
use crate::quadrature::{build_quadrature, construct_solution, interior_grid, QuadratureRule};
use crate::training::{train_stage1_with, train_stage2_with, LossValues, TrainConfig, TrainReport};

pub const ROLE_T: &str = "t_regular";
pub const ROLE_G: &str = "g_t";
pub const ROLE_PINN: &str = "pinn";
pub const ROLE_GAUSSNET: &str = "gaussnet";

/// A trained network with the metadata it is saved under.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub net: Mlp,
    pub metadata: ModelMetadata,
    pub report: TrainReport,
}

impl TrainedModel {
    /// Writes `<stem>.dggf` and `<stem>_report.csv` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let model_path = dir.join(format!("{stem}.dggf"));
        let report_path = dir.join(format!("{stem}_report.csv"));
        save_model_file(&model_path, &self.net, &self.metadata)?;
        self.report.save_csv(&report_path)?;
        Ok((model_path, report_path))
    }
}

pub fn model_metadata(role: &str, domain: &Domain, operator_id: &str, cfg: &TrainConfig) -> ModelMetadata {
    ModelMetadata {
        role: role.to_string(),
        coord_dim: domain.dim(),
        domain_id: domain.id().to_string(),
        operator_id: operator_id.to_string(),
        train_config_digest: cfg.digest(),
        notes: Default::default(),
    }
}

/// Trains the regular part of the alternative input for the run's domain.
pub fn train_t_model(cfg: &RunConfig, progress: &mut dyn FnMut(usize, &LossValues)) -> Result<TrainedModel> {
    cfg.validate()?;
    let domain = cfg.domain()?;
    let train = cfg.stage1_config();
    let (net, report) = train_stage1_with(&domain, train, progress)?;
    let metadata = model_metadata(ROLE_T, &domain, "laplacian", train);
    Ok(TrainedModel { net, metadata, report })
}

/// Errors unless `metadata` describes a regular-part network for `domain`.
pub fn check_t_model(metadata: &ModelMetadata, domain: &Domain) -> Result<()> {
    if metadata.role != ROLE_T {
        return Err(Error::Config(format!("expected a {ROLE_T} model, found role {:?}", metadata.role)));
    }
    if metadata.domain_id != domain.id() || metadata.coord_dim != domain.dim() {
        return Err(Error::Config(format!(
            "t-model domain digest mismatch: model trained on {}, config asks for {}",
            metadata.domain_id,
            domain.id()
        )));
    }
    Ok(())
}

/// Trains the generalized Green's function on top of a regular-part network.
pub fn train_g_model(
    cfg: &RunConfig,
    t_net: &Mlp,
    t_metadata: &ModelMetadata,
    progress: &mut dyn FnMut(usize, &LossValues),
) -> Result<TrainedModel> {
    cfg.validate()?;
    let domain = cfg.domain()?;
    check_t_model(t_metadata, &domain)?;
    let op = cfg.pde_operator()?;
    let (net, report) = train_stage2_with(&domain, &op, t_net, &cfg.train, progress)?;
    let mut metadata = model_metadata(ROLE_G, &domain, &op.id(), &cfg.train);
    metadata.notes.insert("t_model_digest".into(), t_net.digest());
    metadata.notes.insert("t_config_digest".into(), t_metadata.train_config_digest.clone());
    Ok(TrainedModel { net, metadata, report })
}

/// Paths written by a training command.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: TrainedModel,
    pub model_path: PathBuf,
    pub report_path: PathBuf,
}

pub fn cmd_train_t(cfg: &RunConfig, out: &Path, progress: &mut dyn FnMut(usize, &LossValues)) -> Result<TrainOutput> {
    let model = train_t_model(cfg, progress)?;
    let (model_path, report_path) = model.save(out, "t_model")?;
    Ok(TrainOutput { model, model_path, report_path })
}

pub fn cmd_train_g(
    cfg: &RunConfig,
    t_model_path: &Path,
    out: &Path,
    progress: &mut dyn FnMut(usize, &LossValues),
) -> Result<TrainOutput> {
    cfg.validate()?;
    let (t_net, t_meta) = load_model_file(t_model_path)?;
    check_t_model(&t_meta, &cfg.domain()?)?;
    let model = train_g_model(cfg, &t_net, &t_meta, progress)?;
    let (model_path, report_path) = model.save(out, "g_model")?;
    Ok(TrainOutput { model, model_path, report_path })
}

/// One manufactured case solved by convolving a kernel with `Δf`.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub case: String,
    pub points: Array2<f64>,
    pub u_hat: Array1<f64>,
    pub u_ref: Array1<f64>,
    pub relative_l2: f64,
    pub convolution_secs: f64,
    /// `Δf` is zero at every quadrature node, so the convolution is zero.
    pub zero_density: bool,
}

impl SolveResult {
    /// CSV with header `x0,…,u_hat,u_ref,abs_err`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let dim = self.points.ncols();
        let mut header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
        header.extend(["u_hat", "u_ref", "abs_err"].map(String::from));
        w.write_record(&header)?;
        for (i, p) in self.points.rows().into_iter().enumerate() {
            let mut record: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
            record.push(format!("{:e}", self.u_hat[i]));
            record.push(format!("{:e}", self.u_ref[i]));
            record.push(format!("{:e}", (self.u_hat[i] - self.u_ref[i]).abs()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves `case` with a trained kernel; no training happens here.
pub fn solve_case(net_g: &Mlp, case: &ManufacturedCase, rule: &QuadratureRule, points: &Array2<f64>) -> Result<SolveResult> {
    let zero_density = rule.nodes.rows().into_iter().all(|p| (case.laplacian_of_f)(p.as_slice().unwrap()) == 0.0);
    let start = Instant::now();
    let u_hat = construct_solution(net_g, rule, &*case.laplacian_of_f, points.view())?;
    let convolution_secs = start.elapsed().as_secs_f64();
    let u_ref: Array1<f64> = points.rows().into_iter().map(|p| (case.u)(p.as_slice().unwrap())).collect();
    let relative_l2 = relative_l2(u_hat.as_slice().unwrap(), u_ref.as_slice().unwrap())?;
    Ok(SolveResult { case: case.name.clone(), points: points.clone(), u_hat, u_ref, relative_l2, convolution_secs, zero_density })
}

/// Errors unless `metadata` describes a kernel for `operator` on `domain`.
pub fn check_g_model(metadata: &ModelMetadata, domain: &Domain, operator: &PdeOperator) -> Result<()> {
    if metadata.role != ROLE_G {
        return Err(Error::Config(format!("expected a {ROLE_G} model, found role {:?}", metadata.role)));
    }
    if metadata.domain_id != domain.id() || metadata.operator_id != operator.id() {
        return Err(Error::Config(format!(
            "kernel trained for {} on {} cannot solve {} on {}",
            metadata.operator_id,
            metadata.domain_id,
            operator.id(),
            domain.id()
        )));
    }
    Ok(())
}

/// Loads a kernel, solves the named case on an `eval_grid_n` grid and writes
/// `solution_<case>.csv` into `out`.
pub fn cmd_solve(
    cfg: &RunConfig,
    g_model_path: &Path,
    case_name: Option<&str>,
    eval_grid_n: Option<usize>,
    out: &Path,
) -> Result<(SolveResult, PathBuf)> {
    let (net, meta) = load_model_file(g_model_path)?;
    let name = case_name
        .map(str::to_string)
        .or_else(|| cfg.case.clone())
        .ok_or_else(|| Error::Config("no case given on the command line or in the config".into()))?;
    let case = case_by_name(&name)?;
    check_g_model(&meta, &case.domain, &case.operator)?;
    let rule = build_quadrature(&case.domain, cfg.quadrature_resolution)?;
    let points = interior_grid(&case.domain, eval_grid_n.unwrap_or(cfg.eval_grid_n))?;
    let result = solve_case(&net, &case, &rule, &points)?;
    fs::create_dir_all(out)?;
    let path = out.join(format!("solution_{name}.csv"));
    result.write_csv(&path)?;
    Ok((result, path))
}

/// Human-readable summary of a model file.
pub fn inspect_model(path: &Path) -> Result<String> {
    let (net, meta) = load_model_file(path)?;
    let mut text = format!(
        "role: {}\ncoord_dim: {}\ndomain: {}\noperator: {}\nlayers: {:?}\nactivation: {}\noutput_scale: {}\nparameters: {}\nparam_digest: {}\ntrain_config_digest: {}\n",
        meta.role,
        meta.coord_dim,
        meta.domain_id,
        meta.operator_id,
        net.layer_sizes(),
        net.activation().name(),
        net.output_scale(),
        net.num_params(),
        net.digest(),
        meta.train_config_digest
    );
    for (k, v) in &meta.notes {
        text.push_str(&format!("note {k}: {v}\n"));
    }
    Ok(text)
}
