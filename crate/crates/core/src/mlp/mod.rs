//! Fully connected scalar-output networks.
//!
//! Every network in the toolkit (the regular part of the alternative input,
//! the generalized Green's function, PINN solutions, GaussNet kernels) is an
//! [`Mlp`]: affine layers with a smooth activation between them and a final
//! affine layer producing one real number.

mod file;

pub use file::{load_model, load_model_file, save_model, save_model_file, ModelMetadata, FORMAT_VERSION, MAGIC};

use std::fmt;
use std::str::FromStr;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. All variants are smooth, so second input
/// derivatives of the network are meaningful everywhere.
///
/// `Square` (z²) exists for hand-built polynomial networks whose derivatives
/// are known in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sine,
    Softplus,
    Square,
}

/// `1/k!` for k = 0..=13.
const INV_FACTORIALS: [f64; 14] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
    1.0 / 6227020800.0,
];

/// `e^x` for |x| ≤ 100, without branches or calls so batch loops vectorize.
/// Relative error stays below 6e-16.
#[inline(always)]
fn exp_bounded(x: f64) -> f64 {
    // adding 1.5·2^52 rounds to an integer held in the low mantissa bits
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    let shifted = x * std::f64::consts::LOG2_E + SHIFT;
    let n = shifted - SHIFT;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    // Estrin's scheme keeps the dependency chain short
    let c = &INV_FACTORIALS;
    let r2 = r * r;
    let r4 = r2 * r2;
    let low = (c[0] + c[1] * r + (c[2] + c[3] * r) * r2) + (c[4] + c[5] * r + (c[6] + c[7] * r) * r2) * r4;
    let high = (c[8] + c[9] * r + (c[10] + c[11] * r) * r2) + (c[12] + c[13] * r) * r4;
    let poly = low + high * (r4 * r4);
    let exponent = shifted.to_bits().wrapping_sub(SHIFT.to_bits()).wrapping_add(1023) << 52;
    poly * f64::from_bits(exponent)
}

/// `tanh` as `1 − 2/(e^{2z}+1)`; saturates exactly to ±1 for |z| ≥ 50.
#[inline(always)]
fn tanh_value(z: f64) -> f64 {
    1.0 - 2.0 / (exp_bounded((2.0 * z).clamp(-100.0, 100.0)) + 1.0)
}

impl Activation {
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => tanh_value(z),
            Activation::Sine => z.sin(),
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            Activation::Square => z * z,
        }
    }

    /// `[σ(z), σ'(z), σ''(z), σ'''(z)]`.
    #[inline]
    pub fn derivatives(self, z: f64) -> [f64; 4] {
        let s = self.value(z);
        match self {
            Activation::Tanh => {
                let d1 = 1.0 - s * s;
                let d2 = -2.0 * s * d1;
                let d3 = -2.0 * d1 * d1 + 4.0 * s * s * d1;
                [s, d1, d2, d3]
            }
            Activation::Sine => {
                let c = z.cos();
                [s, c, -s, -c]
            }
            Activation::Softplus => {
                let sig = if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                };
                let d2 = sig * (1.0 - sig);
                [s, sig, d2, d2 * (1.0 - 2.0 * sig)]
            }
            Activation::Square => [s, 2.0 * z, 2.0, 0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
            Activation::Softplus => "softplus",
            Activation::Square => "square",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sine" | "sin" => Ok(Activation::Sine),
            "softplus" => Ok(Activation::Softplus),
            "square" => Ok(Activation::Square),
            "relu" => Err(Error::InvalidArgument(
                "relu has vanishing second derivatives and cannot back a derivative-bearing loss".into(),
            )),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

/// Weight matrix (`out × in`) and bias vector of one affine layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weights: Array2::zeros((fan_out, fan_in)), bias: Array1::zeros(fan_out) }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    layers: Vec<LayerParams>,
    /// Fixed, untrained factor applied to the final affine layer.
    output_scale: f64,
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument("a network needs at least an input and an output layer".into()));
    }
    if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidArgument(format!("layer {pos} has size 0")));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::InvalidArgument("networks are scalar-valued: output size must be 1".into()));
    }
    Ok(())
}

/// Builds a network with Glorot-uniform weights and zero biases.
pub fn init_mlp(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Mlp> {
    Mlp::new(layer_sizes, activation, seed)
}

impl Mlp {
    /// Glorot-uniform weights (`bound = sqrt(6 / (fan_in + fan_out))`), zero biases.
    pub fn new(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..bound));
                LayerParams { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(Self { layer_sizes: layer_sizes.to_vec(), activation, layers, output_scale: 1.0 })
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let layers = layer_sizes.windows(2).map(|w| LayerParams::zeros(w[0], w[1])).collect();
        Ok(Self { layer_sizes: layer_sizes.to_vec(), activation, layers, output_scale: 1.0 })
    }

    /// Assembles a network from explicit layers, checking that consecutive
    /// shapes chain and that the output is scalar.
    pub fn from_layers(activation: Activation, layers: Vec<LayerParams>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("a network needs at least one layer".into()))?;
        let mut sizes = vec![first.weights.ncols()];
        for (i, layer) in layers.iter().enumerate() {
            let (out, inp) = layer.weights.dim();
            if inp != *sizes.last().unwrap() {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} expects {inp} inputs but the previous layer produces {}",
                    sizes.last().unwrap()
                )));
            }
            if layer.bias.len() != out {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} has {out} outputs but a bias of length {}",
                    layer.bias.len()
                )));
            }
            sizes.push(out);
        }
        validate_sizes(&sizes)?;
        Ok(Self { layer_sizes: sizes, activation, layers, output_scale: 1.0 })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Multiplies every output by a fixed `scale`, so a target of magnitude
    /// `scale` is learned at unit magnitude.
    pub fn with_output_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("output scale must be positive and finite, got {scale}")));
        }
        self.output_scale = scale;
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable views of every layer. Views cannot change shape, so the
    /// architecture invariants survive arbitrary edits.
    pub fn layers_mut(&mut self) -> Vec<(ArrayViewMut2<'_, f64>, ArrayViewMut1<'_, f64>)> {
        self.layers.iter_mut().map(|l| (l.weights.view_mut(), l.bias.view_mut())).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LayerParams::num_params).sum()
    }

    /// Parameters in persistence order: layer by layer, weights row-major then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), got: values.len() });
        }
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = it.next().unwrap();
            }
            for b in layer.bias.iter_mut() {
                *b = it.next().unwrap();
            }
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got });
        }
        Ok(())
    }

    /// Evaluates the network at one point.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x.len())?;
        let mut act = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.bias.len());
            for (row, &b) in layer.weights.outer_iter().zip(layer.bias.iter()) {
                let mut acc = 0.0;
                for (w, a) in row.iter().zip(&act) {
                    acc += w * a;
                }
                let z = acc + b;
                next.push(if l == last { z * self.output_scale } else { self.activation.value(z) });
            }
            act = next;
        }
        Ok(act[0])
    }

    /// Evaluates the network at every row of `points` with dense matrix products.
    ///
    /// Results agree with [`Mlp::forward`] to roundoff, not bit for bit: the
    /// blocked products sum in a different order.
    pub fn forward_batch(&self, points: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(points.ncols())?;
        let mut act = points.t().to_owned();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Array2::zeros((layer.weights.nrows(), act.ncols()));
            general_mat_mul(1.0, &layer.weights, &act, 0.0, &mut z);
            for (mut row, &b) in z.outer_iter_mut().zip(layer.bias.iter()) {
                if l == last {
                    let scale = self.output_scale;
                    row.mapv_inplace(|v| (v + b) * scale);
                } else if self.activation == Activation::Tanh {
                    row.mapv_inplace(|v| tanh_value(v + b));
                } else {
                    let act_fn = self.activation;
                    row.mapv_inplace(|v| act_fn.value(v + b));
                }
            }
            act = z;
        }
        Ok(act.index_axis_move(Axis(0), 0))
    }

    /// Hex SHA-256 over architecture and parameter bytes.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for s in &self.layer_sizes {
            hasher.update((*s as u64).to_le_bytes());
        }
        hasher.update(self.activation.name().as_bytes());
        hasher.update(self.output_scale.to_le_bytes());
        for p in self.params_flat() {
            hasher.update(p.to_le_bytes());
        }
        hex_digest(hasher)
    }
}

pub(crate) fn hex_digest(hasher: Sha256) -> String {
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
