use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mlp::{hex_digest, init_mlp, Activation, Mlp};

fn default_hidden_layers() -> usize {
    4
}

fn default_width() -> usize {
    50
}

fn default_activation() -> Activation {
    Activation::Tanh
}

fn default_lambda_res() -> f64 {
    1.0
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn unit_scale() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Hidden-layer architecture shared by every trained network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_hidden_layers")]
    pub hidden_layers: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Fixed factor on the network output; set it near the target's magnitude.
    #[serde(default = "unit_scale")]
    pub output_scale: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_layers: default_hidden_layers(),
            width: default_width(),
            activation: default_activation(),
            output_scale: unit_scale(),
        }
    }
}

impl NetworkConfig {
    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = vec![input_dim];
        sizes.extend(std::iter::repeat(self.width).take(self.hidden_layers));
        sizes.push(1);
        sizes
    }

    /// Freshly initialised network for `input_dim` inputs.
    pub fn build(&self, input_dim: usize, seed: u64) -> Result<Mlp> {
        init_mlp(&self.layer_sizes(input_dim), self.activation, seed)?.with_output_scale(self.output_scale)
    }
}

/// Optimisation settings for one training run.
///
/// `n_dm`/`n_bd` are the interior/boundary batch sizes of kernel (and
/// baseline) training; `n_dm_t`/`n_bd_t` those of the regular-part training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub network: NetworkConfig,
    pub n_dm: usize,
    pub n_bd: usize,
    pub n_dm_t: usize,
    pub n_bd_t: usize,
    #[serde(default = "default_lambda_res")]
    pub lambda_res: f64,
    pub lambda_bd: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub resample_every_epoch: bool,
}

impl TrainConfig {
    /// 8 hidden layers of 100 units with large batches.
    pub fn full_scale() -> Self {
        Self {
            network: NetworkConfig { hidden_layers: 8, width: 100, ..NetworkConfig::default() },
            n_dm: 100_000,
            n_bd: 300_000,
            n_dm_t: 100_000,
            n_bd_t: 300_000,
            lambda_res: 1.0,
            lambda_bd: 5.0,
            learning_rate: 1e-3,
            epochs: 100_000,
            seed: 0,
            resample_every_epoch: true,
        }
    }

    /// 4 hidden layers of 50 units; sized for a single CPU core.
    pub fn desk_scale() -> Self {
        Self {
            network: NetworkConfig::default(),
            n_dm: 1000,
            n_bd: 1000,
            n_dm_t: 2000,
            n_bd_t: 2000,
            lambda_res: 1.0,
            lambda_bd: 5.0,
            learning_rate: 1e-3,
            epochs: 5000,
            seed: 0,
            resample_every_epoch: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.network.hidden_layers == 0 || self.network.width == 0 {
            return bad("network needs at least one hidden layer of positive width".into());
        }
        if !(self.network.output_scale > 0.0 && self.network.output_scale.is_finite()) {
            return bad(format!("output_scale must be positive, got {}", self.network.output_scale));
        }
        for (name, v) in [("n_dm", self.n_dm), ("n_bd", self.n_bd), ("n_dm_t", self.n_dm_t), ("n_bd_t", self.n_bd_t)] {
            if v == 0 {
                return bad(format!("batch size {name} must be at least 1"));
            }
        }
        if !(self.lambda_res > 0.0 && self.lambda_res.is_finite()) {
            return bad(format!("lambda_res must be positive, got {}", self.lambda_res));
        }
        if !(self.lambda_bd >= 0.0 && self.lambda_bd.is_finite()) {
            return bad(format!("lambda_bd must be nonnegative, got {}", self.lambda_bd));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(self).expect("configs serialize"));
        hex_digest(hasher)
    }
}
