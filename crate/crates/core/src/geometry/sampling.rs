//! Latin hypercube sampling and the interior/boundary samplers built on it.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Domain;
use crate::error::{Error, Result};

const MAX_ROUNDS: usize = 200;
const MIN_ACCEPTANCE: f64 = 1e-3;

/// `count` points in `[0, 1)^dim` (one per row), exactly one per stratum
/// `[k/count, (k+1)/count)` in every coordinate.
pub fn lhs(count: usize, dim: usize, seed: u64) -> Result<Array2<f64>> {
    lhs_with(&mut ChaCha8Rng::seed_from_u64(seed), count, dim)
}

pub fn lhs_with<R: Rng + ?Sized>(rng: &mut R, count: usize, dim: usize) -> Result<Array2<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("Latin hypercube sample count must be at least 1".into()));
    }
    let n = count as f64;
    let mut out = Array2::zeros((count, dim));
    let mut perm: Vec<usize> = (0..count).collect();
    for d in 0..dim {
        perm.shuffle(rng);
        for (i, &k) in perm.iter().enumerate() {
            let lo = k as f64 / n;
            let hi = (k + 1) as f64 / n;
            let v = (k as f64 + rng.gen::<f64>()) / n;
            out[[i, d]] = v.clamp(lo, hi.next_down());
        }
    }
    Ok(out)
}

fn scale_to_box(unit: &mut Array2<f64>, lo: &[f64], hi: &[f64]) {
    for (d, mut col) in unit.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|u| lo[d] + u * (hi[d] - lo[d]));
    }
}

/// `count` strictly interior points (one per row).
pub fn sample_interior(domain: &Domain, count: usize, seed: u64) -> Result<Array2<f64>> {
    sample_interior_with(domain, count, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// LHS over the bounding box with rejection; rejected strata are refilled by
/// further LHS rounds sized from the observed acceptance ratio.
pub fn sample_interior_with<R: Rng + ?Sized>(domain: &Domain, count: usize, rng: &mut R) -> Result<Array2<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let dim = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let mut acceptance = (domain.volume() / box_volume).clamp(MIN_ACCEPTANCE, 1.0);
    let mut out = Array2::zeros((count, dim));
    let (mut filled, mut drawn) = (0usize, 0usize);
    for _ in 0..MAX_ROUNDS {
        let need = count - filled;
        let batch = ((need as f64 / acceptance) * 1.05).ceil() as usize + 4;
        let mut candidates = lhs_with(rng, batch, dim)?;
        scale_to_box(&mut candidates, &lo, &hi);
        drawn += batch;
        for p in candidates.rows() {
            if filled == count {
                break;
            }
            if domain.contains_unchecked(p.as_slice().unwrap()) {
                out.row_mut(filled).assign(&p);
                filled += 1;
            }
        }
        if filled == count {
            return Ok(out);
        }
        acceptance = filled as f64 / drawn as f64;
        if acceptance < MIN_ACCEPTANCE {
            break;
        }
        acceptance = acceptance.max(MIN_ACCEPTANCE);
    }
    Err(Error::DegenerateDomain(format!(
        "interior acceptance ratio {:.2e} after {drawn} candidates",
        filled as f64 / drawn.max(1) as f64
    )))
}

/// `count` points on the boundary, uniform in arc length / surface area.
pub fn sample_boundary(domain: &Domain, count: usize, seed: u64) -> Result<Array2<f64>> {
    sample_boundary_with(domain, count, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_boundary_with<R: Rng + ?Sized>(domain: &Domain, count: usize, rng: &mut R) -> Result<Array2<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let dim = domain.dim();
    let mut out = Array2::zeros((count, dim));
    let mut filled = 0;
    for _ in 0..MAX_ROUNDS {
        let need = count - filled;
        // exact LHS stratification along the boundary parameter unless the
        // shape needs acceptance thinning
        let batch = if domain.boundary_thinning() { need + need / 2 + 4 } else { need };
        let params = lhs_with(rng, batch, domain.boundary_param_dim())?;
        for row in params.rows() {
            if filled == count {
                break;
            }
            let (p, accept) = domain.boundary_point(row.as_slice().unwrap());
            if accept >= 1.0 || rng.gen::<f64>() < accept {
                out.slice_mut(s![filled, ..]).assign(&ndarray::ArrayView1::from(&p));
                filled += 1;
            }
        }
        if filled == count {
            return Ok(out);
        }
    }
    Err(Error::DegenerateDomain("boundary sampler failed to fill its quota".into()))
}

/// One training batch of point pairs, stored as rows `(r, ξ)` of width `2n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    /// Interior pairs: both `r` and `ξ` strictly interior.
    pub interior: Array2<f64>,
    /// Boundary pairs: `r` on the boundary, `ξ` strictly interior.
    pub boundary: Array2<f64>,
    pub seed: u64,
}

impl SampleBatch {
    /// Draws a batch; interior pairs with `|r − ξ| < min_separation` get a
    /// fresh `ξ` until they are far enough apart.
    pub fn generate(
        domain: &Domain,
        n_interior: usize,
        n_boundary: usize,
        min_separation: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = domain.dim();
        let interior = Self::pairs(domain, sample_interior_with(domain, n_interior, &mut rng)?, min_separation, &mut rng)?;
        let boundary =
            Self::pairs(domain, sample_boundary_with(domain, n_boundary, &mut rng)?, min_separation, &mut rng)?;
        debug_assert_eq!(interior.ncols(), 2 * n);
        Ok(Self { interior, boundary, seed })
    }

    fn pairs(domain: &Domain, r: Array2<f64>, min_separation: f64, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
        let (count, n) = r.dim();
        let xi = sample_interior_with(domain, count, rng)?;
        let mut out = Array2::zeros((count, 2 * n));
        out.slice_mut(s![.., ..n]).assign(&r);
        out.slice_mut(s![.., n..]).assign(&xi);
        for i in 0..count {
            for _ in 0..MAX_ROUNDS {
                let row = out.row(i);
                let dist = (0..n).map(|k| (row[k] - row[n + k]).powi(2)).sum::<f64>().sqrt();
                if dist >= min_separation {
                    break;
                }
                let fresh = sample_interior_with(domain, 1, rng)?;
                out.slice_mut(s![i, n..]).assign(&fresh.row(0));
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.interior.ncols() / 2
    }
}
