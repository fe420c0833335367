use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainSpec};
use crate::operators::{OperatorSpec, PdeOperator};
use crate::oracles::case_by_name;
use crate::training::TrainConfig;

/// Which networks each stability seed retrains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityScenario {
    /// One regular-part network shared by all seeds; only the kernel is retrained.
    #[default]
    Stage2Only,
    /// Both networks retrained per seed.
    BothStages,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussNetSettings {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub symmetry_loss_weight: f64,
    /// Output scale of the GaussNet network; its target is of order one.
    #[serde(default = "unit_scale")]
    pub output_scale: f64,
}

impl Default for GaussNetSettings {
    fn default() -> Self {
        Self { epsilons: default_epsilons(), symmetry_loss_weight: 0.0, output_scale: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dggf,
    Pinn,
    Gaussnet,
    Ngf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dggf => "dggf",
            Method::Pinn => "pinn",
            Method::Gaussnet => "gaussnet",
            Method::Ngf => "ngf",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSettings {
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Operator/domain grid; empty means the run's own operator and domain.
    #[serde(default)]
    pub operators: Vec<OperatorSpec>,
    #[serde(default)]
    pub domains: Vec<DomainSpec>,
    /// Cases to solve; empty means the first catalog case for each
    /// operator/domain pair.
    #[serde(default)]
    pub cases: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_ngf_grid")]
    pub ngf_grid_n: usize,
    /// Output scale of the PINN network; its target is the solution itself.
    #[serde(default = "unit_scale")]
    pub pinn_output_scale: f64,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            operators: Vec::new(),
            domains: Vec::new(),
            cases: Vec::new(),
            seeds: default_seeds(),
            ngf_grid_n: default_ngf_grid(),
            pinn_output_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySettings {
    #[serde(default = "default_stability_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub scenario: StabilityScenario,
    /// Points per axis of the fixed `r` and `ξ` grids.
    #[serde(default = "default_stability_grid")]
    pub grid_n: usize,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self { n_seeds: default_stability_seeds(), scenario: StabilityScenario::default(), grid_n: default_stability_grid() }
    }
}

/// Everything one command needs; loaded from JSON and validated before any
/// training starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub operator: OperatorSpec,
    /// Kernel training (and regular-part training unless `train_t` is set).
    pub train: TrainConfig,
    #[serde(default)]
    pub train_t: Option<TrainConfig>,
    #[serde(default = "default_resolution")]
    pub quadrature_resolution: usize,
    #[serde(default = "default_eval_grid")]
    pub eval_grid_n: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub case: Option<String>,
    #[serde(default)]
    pub gaussnet: GaussNetSettings,
    #[serde(default)]
    pub benchmark: BenchmarkSettings,
    #[serde(default)]
    pub stability: StabilitySettings,
}

fn unit_scale() -> f64 {
    1.0
}
fn default_epsilons() -> Vec<f64> {
    vec![0.05, 0.1]
}
fn default_methods() -> Vec<Method> {
    vec![Method::Dggf, Method::Pinn, Method::Gaussnet, Method::Ngf]
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_ngf_grid() -> usize {
    64
}
fn default_stability_seeds() -> usize {
    5
}
fn default_stability_grid() -> usize {
    6
}
fn default_resolution() -> usize {
    64
}
fn default_eval_grid() -> usize {
    32
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    /// Desk-scale Poisson problem on the unit square.
    ///
    /// The output scales match each network's target: the regular part is
    /// of order 1e-2 and the kernel of order 1e-3.
    pub fn desk_square_poisson() -> Self {
        let mut train_t = TrainConfig::desk_scale();
        train_t.epochs = 20_000;
        train_t.lambda_bd = 50.0;
        train_t.network.output_scale = 0.1;
        let mut train = TrainConfig::desk_scale();
        train.epochs = 10_000;
        train.lambda_bd = 50.0;
        train.network.output_scale = 0.01;
        Self {
            domain: DomainSpec::Square { origin: [0.0, 0.0], side: 1.0 },
            operator: OperatorSpec { kind: crate::operators::OperatorKind::Poisson, k: 0.0 },
            train,
            train_t: Some(train_t),
            quadrature_resolution: default_resolution(),
            eval_grid_n: default_eval_grid(),
            out_dir: default_out_dir(),
            case: Some("poisson_square_sin11".into()),
            gaussnet: GaussNetSettings::default(),
            benchmark: BenchmarkSettings::default(),
            stability: StabilitySettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.domain.clone())
    }

    pub fn pde_operator(&self) -> Result<PdeOperator> {
        PdeOperator::from_spec(&self.operator, self.domain()?.dim())
    }

    pub fn stage1_config(&self) -> &TrainConfig {
        self.train_t.as_ref().unwrap_or(&self.train)
    }

    /// Kernel training settings with the GaussNet output scale.
    pub fn gaussnet_train(&self) -> TrainConfig {
        let mut train = self.train.clone();
        train.network.output_scale = self.gaussnet.output_scale;
        train
    }

    /// Kernel training settings with the PINN output scale.
    pub fn pinn_train(&self) -> TrainConfig {
        let mut train = self.train.clone();
        train.network.output_scale = self.benchmark.pinn_output_scale;
        train
    }

    /// Replaces the seed of every training section.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        if let Some(t) = self.train_t.as_mut() {
            t.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let domain = self.domain()?;
        let operator = self.pde_operator()?;
        self.train.validate()?;
        if let Some(t) = &self.train_t {
            t.validate()?;
        }
        if self.quadrature_resolution < 4 {
            return Err(Error::Config(format!("quadrature_resolution must be at least 4, got {}", self.quadrature_resolution)));
        }
        if self.eval_grid_n < 2 {
            return Err(Error::Config(format!("eval_grid_n must be at least 2, got {}", self.eval_grid_n)));
        }
        if let Some(name) = &self.case {
            let case = case_by_name(name)?;
            if case.domain != domain || case.operator != operator {
                return Err(Error::Config(format!(
                    "case {name} is posed for {} on {}, not {} on {}",
                    case.operator,
                    case.domain.kind(),
                    operator,
                    domain.kind()
                )));
            }
        }
        if let Some(&eps) = self.gaussnet.epsilons.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("gaussnet epsilon must be positive, got {eps}")));
        }
        for scale in [self.gaussnet.output_scale, self.benchmark.pinn_output_scale] {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!("baseline output_scale must be positive, got {scale}")));
            }
        }
        if !(self.gaussnet.symmetry_loss_weight >= 0.0) {
            return Err(Error::Config("gaussnet symmetry_loss_weight must be nonnegative".into()));
        }
        for spec in &self.benchmark.domains {
            Domain::new(spec.clone())?;
        }
        for spec in &self.benchmark.operators {
            PdeOperator::from_spec(spec, 2)?;
        }
        for name in &self.benchmark.cases {
            case_by_name(name)?;
        }
        if self.benchmark.seeds.is_empty() {
            return Err(Error::Config("benchmark needs at least one seed".into()));
        }
        if self.benchmark.ngf_grid_n < 16 {
            return Err(Error::Config("benchmark ngf_grid_n must be at least 16".into()));
        }
        if self.stability.n_seeds < 2 {
            return Err(Error::Config(format!("stability needs at least 2 seeds, got {}", self.stability.n_seeds)));
        }
        if self.stability.grid_n < 1 {
            return Err(Error::Config("stability grid_n must be positive".into()));
        }
        Ok(())
    }
}
