//! `dggf`: train generalized Green's function kernels, solve with them, and
//! run the comparison experiments.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dggf_core::experiments::{
    cmd_benchmark, cmd_solve, cmd_stability, cmd_train_g, cmd_train_t, inspect_model, RunConfig, StabilityScenario,
};
use dggf_core::training::LossValues;

// training allocates and frees large buffers every epoch; the system
// allocator returns them to the OS each time
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser, Debug)]
#[command(name = "dggf", version, about = "Mesh-free linear PDE solving with trained Green's function kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides every training seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        let out = self.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
        Ok((cfg, out))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    Stage2Only,
    BothStages,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the regular part of the alternative input.
    TrainT(Common),
    /// Train the generalized Green's function on a saved regular-part model.
    TrainG {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t_model: PathBuf,
    },
    /// Solve a manufactured case with a saved kernel.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        g_model: PathBuf,
        /// Case name; defaults to the config's `case`.
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        eval_grid_n: Option<usize>,
    },
    /// Compare all methods under matched training budgets.
    Benchmark(Common),
    /// Retrain kernels over several seeds and report per-point variance.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_seeds: Option<usize>,
        #[arg(long, value_enum)]
        scenario: Option<Scenario>,
    },
    /// Print the metadata of a saved model.
    InspectModel { path: PathBuf },
}

fn progress(label: &'static str, epochs: usize) -> impl FnMut(usize, &LossValues) {
    let every = (epochs / 10).max(1);
    move |epoch, loss| {
        if epoch % every == 0 || epoch + 1 == epochs {
            eprintln!(
                "[{label}] epoch {epoch}/{epochs}: total {:.4e} residual {:.4e} boundary {:.4e}",
                loss.total, loss.residual, loss.boundary
            );
        }
    }
}

fn report_training(label: &str, model_path: &Path, report_path: &Path, wall_secs: f64, final_loss: Option<LossValues>) {
    println!("{label} model: {}", model_path.display());
    println!("{label} report: {}", report_path.display());
    if let Some(l) = final_loss {
        println!(
            "final losses: total {:.4e} residual {:.4e} boundary {:.4e} ({wall_secs:.1} s)",
            l.total, l.residual, l.boundary
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainT(common) => {
            let (cfg, out) = common.load()?;
            let epochs = cfg.stage1_config().epochs;
            let result = cmd_train_t(&cfg, &out, &mut progress("train-t", epochs))?;
            let r = &result.model.report;
            report_training("t", &result.model_path, &result.report_path, r.wall_secs, r.final_losses());
        }
        Command::TrainG { common, t_model } => {
            let (cfg, out) = common.load()?;
            let result = cmd_train_g(&cfg, &t_model, &out, &mut progress("train-g", cfg.train.epochs))
                .with_context(|| format!("training on {}", t_model.display()))?;
            let r = &result.model.report;
            report_training("g", &result.model_path, &result.report_path, r.wall_secs, r.final_losses());
        }
        Command::Solve { common, g_model, case, eval_grid_n } => {
            let (cfg, out) = common.load()?;
            let (result, path) = cmd_solve(&cfg, &g_model, case.as_deref(), eval_grid_n, &out)?;
            if result.zero_density {
                eprintln!(
                    "warning: Δf vanishes on every quadrature node, so the interior convolution is zero; \
                     this input needs the boundary correction term"
                );
            }
            println!("solution: {}", path.display());
            println!(
                "case {}: relative_l2 {:.4e}, convolution {:.4} s over {} points",
                result.case,
                result.relative_l2,
                result.convolution_secs,
                result.points.nrows()
            );
        }
        Command::Benchmark(common) => {
            let (cfg, out) = common.load()?;
            let (_, path) = cmd_benchmark(&cfg, &out, &mut |row| {
                let err = row.relative_l2.map_or("-".to_string(), |e| format!("{e:.4e}"));
                eprintln!("{} {} {} {} seed {}: {err} [{}]", row.method, row.operator, row.domain, row.case, row.seed, row.status);
            })?;
            println!("benchmark: {}", path.display());
        }
        Command::Stability { common, n_seeds, scenario } => {
            let (cfg, out) = common.load()?;
            let n_seeds = n_seeds.unwrap_or(cfg.stability.n_seeds);
            let scenario = match scenario {
                Some(Scenario::Stage2Only) => StabilityScenario::Stage2Only,
                Some(Scenario::BothStages) => StabilityScenario::BothStages,
                None => cfg.stability.scenario,
            };
            let (report, path) = cmd_stability(&cfg, n_seeds, scenario, &out, &mut |seed, stage| {
                eprintln!("[stability] seed {seed}: training {stage}");
            })?;
            println!("stability: {}", path.display());
            println!(
                "max variance {:.4e}, squared mean error {:.4e}, all finite: {}",
                report.max_variance(),
                report.mean_abs_error().powi(2),
                report.all_finite()
            );
        }
        Command::InspectModel { path } => {
            print!("{}", inspect_model(&path)?);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
