//! Batched second-order jets through an [`Mlp`] with a hand-written adjoint.
//!
//! Activations of a batch of `B` points along `m` directions are stored as one
//! stacked matrix with `B·(1 + 2m)` columns: the value block, then for each
//! direction its first-derivative block and its second-derivative block. Every
//! affine layer is then a single matrix product over the whole stack.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::ParamGradient;
use crate::error::{Error, Result};
use crate::mlp::Mlp;

/// Recorded forward pass of a batch, kept for the reverse sweep.
#[derive(Clone, Debug)]
pub struct JetBatch {
    batch: usize,
    dirs: Vec<usize>,
    /// Input to each layer (stacked).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden layer (stacked).
    pre: Vec<Array2<f64>>,
    /// σ', σ'', σ''' at the value block of each hidden layer.
    slopes: Vec<[Array2<f64>; 3]>,
    output: Array1<f64>,
}

impl JetBatch {
    /// Runs `points` (one point per row) through `net`, differentiating along
    /// the input coordinates listed in `dirs`.
    pub fn forward(net: &Mlp, points: ArrayView2<'_, f64>, dirs: &[usize]) -> Result<Self> {
        net.check_input(points.ncols())?;
        if let Some(&bad) = dirs.iter().find(|&&d| d >= net.input_dim()) {
            return Err(Error::InvalidArgument(format!(
                "derivative direction {bad} outside input dimension {}",
                net.input_dim()
            )));
        }
        let b = points.nrows();
        let m = dirs.len();
        let cols = b * (1 + 2 * m);

        let mut input = Array2::zeros((net.input_dim(), cols));
        input.slice_mut(s![.., ..b]).assign(&points.t());
        for (k, &d) in dirs.iter().enumerate() {
            let start = (1 + 2 * k) * b;
            input.slice_mut(s![d, start..start + b]).fill(1.0);
        }

        let act = net.activation();
        let n_layers = net.layers().len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut slopes = Vec::with_capacity(n_layers - 1);
        let mut current = input;
        for (l, layer) in net.layers().iter().enumerate() {
            let width = layer.weights.nrows();
            let mut z = layer.weights.dot(&current);
            for (mut row, &bias) in z.outer_iter_mut().zip(layer.bias.iter()) {
                row.slice_mut(s![..b]).mapv_inplace(|v| v + bias);
            }
            inputs.push(current);
            if l + 1 == n_layers {
                let scale = net.output_scale();
                let output = z.index_axis_move(Axis(0), 0).mapv_into(|v| v * scale);
                return Ok(Self { batch: b, dirs: dirs.to_vec(), inputs, pre, slopes, output });
            }

            let mut a = Vec::with_capacity(width * cols);
            let mut s1 = Vec::with_capacity(width * b);
            let mut s2 = Vec::with_capacity(width * b);
            let mut s3 = Vec::with_capacity(width * b);
            for zr in z.outer_iter() {
                let zr = zr.to_slice().unwrap();
                let start = s1.len();
                for &v in &zr[..b] {
                    let [sv, d1, d2, d3] = act.derivatives(v);
                    a.push(sv);
                    s1.push(d1);
                    s2.push(d2);
                    s3.push(d3);
                }
                let (r1, r2) = (&s1[start..], &s2[start..]);
                for k in 0..m {
                    let zd = &zr[(1 + 2 * k) * b..(2 + 2 * k) * b];
                    let zdd = &zr[(2 + 2 * k) * b..(3 + 2 * k) * b];
                    a.extend(zd.iter().zip(r1).map(|(zd, d1)| d1 * zd));
                    a.extend(zd.iter().zip(zdd).zip(r1.iter().zip(r2)).map(|((zd, zdd), (d1, d2))| d2 * zd * zd + d1 * zdd));
                }
            }
            let a = Array2::from_shape_vec((width, cols), a).unwrap();
            let s1 = Array2::from_shape_vec((width, b), s1).unwrap();
            let s2 = Array2::from_shape_vec((width, b), s2).unwrap();
            let s3 = Array2::from_shape_vec((width, b), s3).unwrap();
            pre.push(z);
            slopes.push([s1, s2, s3]);
            current = a;
        }
        unreachable!("networks have at least one layer")
    }

    pub fn len(&self) -> usize {
        self.batch
    }

    pub fn is_empty(&self) -> bool {
        self.batch == 0
    }

    pub fn dirs(&self) -> &[usize] {
        &self.dirs
    }

    /// Number of stacked output slots, `B·(1 + 2m)`.
    pub fn slots(&self) -> usize {
        self.output.len()
    }

    pub fn value_slot(&self, point: usize) -> usize {
        point
    }

    pub fn grad_slot(&self, point: usize, k: usize) -> usize {
        (1 + 2 * k) * self.batch + point
    }

    pub fn hess_slot(&self, point: usize, k: usize) -> usize {
        (2 + 2 * k) * self.batch + point
    }

    pub fn output(&self) -> ArrayView1<'_, f64> {
        self.output.view()
    }

    pub fn value(&self, point: usize) -> f64 {
        self.output[self.value_slot(point)]
    }

    pub fn grad(&self, point: usize, k: usize) -> f64 {
        self.output[self.grad_slot(point, k)]
    }

    pub fn hess(&self, point: usize, k: usize) -> f64 {
        self.output[self.hess_slot(point, k)]
    }

    /// Reverse sweep: given `∂L/∂(output slot)` for every slot, accumulates
    /// `∂L/∂θ` into `grad`.
    pub fn backward(&self, net: &Mlp, seeds: ArrayView1<'_, f64>, grad: &mut ParamGradient) -> Result<()> {
        if seeds.len() != self.slots() {
            return Err(Error::DimensionMismatch { expected: self.slots(), got: seeds.len() });
        }
        if !grad.is_congruent(net) {
            return Err(Error::InvalidArgument("gradient is not shaped like the network".into()));
        }
        let b = self.batch;
        let m = self.dirs.len();
        let n_layers = net.layers().len();

        let mut zbar = (&seeds * net.output_scale()).insert_axis(Axis(0));
        for l in (0..n_layers).rev() {
            if l + 1 < n_layers {
                // zbar currently holds the adjoint of this layer's activation output
                let z = &self.pre[l];
                let [s1, s2, s3] = &self.slopes[l];
                for r in 0..zbar.nrows() {
                    let zr = z.row(r);
                    let zr = zr.to_slice().unwrap();
                    let (r1, r2, r3) = (s1.row(r), s2.row(r), s3.row(r));
                    let (r1, r2, r3) = (r1.to_slice().unwrap(), r2.to_slice().unwrap(), r3.to_slice().unwrap());
                    let mut ab = zbar.row_mut(r);
                    let ab = ab.as_slice_mut().unwrap();
                    let (values, rest) = ab.split_at_mut(b);
                    let mut value_bar: Vec<f64> = values.iter().zip(r1).map(|(a, d1)| a * d1).collect();
                    for (k, blocks) in rest.chunks_exact_mut(2 * b).enumerate().take(m) {
                        let (ad, add) = blocks.split_at_mut(b);
                        let zd = &zr[(1 + 2 * k) * b..(2 + 2 * k) * b];
                        let zdd = &zr[(2 + 2 * k) * b..(3 + 2 * k) * b];
                        for p in 0..b {
                            let (d1, d2, d3) = (r1[p], r2[p], r3[p]);
                            let (x1, x2) = (zd[p], zdd[p]);
                            let (a1, a2) = (ad[p], add[p]);
                            value_bar[p] += a1 * d2 * x1 + a2 * (d3 * x1 * x1 + d2 * x2);
                            ad[p] = a1 * d1 + 2.0 * a2 * d2 * x1;
                            add[p] = a2 * d1;
                        }
                    }
                    values.copy_from_slice(&value_bar);
                }
            }
            let input = &self.inputs[l];
            let g = &mut grad.layers[l];
            general_mat_mul(1.0, &zbar, &input.t(), 1.0, &mut g.weights);
            g.bias += &zbar.slice(s![.., ..b]).sum_axis(Axis(1));
            if l > 0 {
                let w = &net.layers()[l].weights;
                zbar = w.t().dot(&zbar);
                if !zbar.is_standard_layout() {
                    zbar = zbar.as_standard_layout().into_owned();
                }
            }
        }
        Ok(())
    }
}
