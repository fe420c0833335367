//! Closed uniform cubic B-spline curves.

/// Nodes and weights of 8-point Gauss–Legendre on [-1, 1].
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_27),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_361_97),
    (0.183_434_642_495_649_8, 0.362_683_783_378_361_97),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_27),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

const ARC_SUBDIVISIONS: usize = 32;
const COARSE_PER_SEGMENT: usize = 64;

/// Counter-clockwise closed cubic B-spline with an arc-length table.
///
/// The curve parameter `s` runs over `[0, n)` for `n` control points; segment
/// `i` is driven by control points `i..i+4` (cyclically).
#[derive(Clone, Debug)]
pub struct ClosedBSpline {
    ctrl: Vec<[f64; 2]>,
    /// Cumulative arc length at `s = k / ARC_SUBDIVISIONS`.
    cum_length: Vec<f64>,
    coarse: Vec<[f64; 2]>,
    /// Cells of a grid over the bounding box: -1 fully inside, 1 fully
    /// outside, 0 close to the curve (needs an exact distance query).
    cells: Vec<i8>,
}

const CELL_GRID: usize = 128;

fn basis(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    [
        u * u * u / 6.0,
        (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
        (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
        t * t * t / 6.0,
    ]
}

fn basis_d1(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    [-u * u / 2.0, (3.0 * t * t - 4.0 * t) / 2.0, (-3.0 * t * t + 2.0 * t + 1.0) / 2.0, t * t / 2.0]
}

fn basis_d2(t: f64) -> [f64; 4] {
    [1.0 - t, 3.0 * t - 2.0, 1.0 - 3.0 * t, t]
}

impl ClosedBSpline {
    /// Builds the curve; a clockwise control polygon is reversed so the
    /// curve is always traversed counter-clockwise.
    pub fn new(mut ctrl: Vec<[f64; 2]>) -> Self {
        assert!(ctrl.len() >= 4, "a closed cubic B-spline needs at least 4 control points");
        let mut curve = Self { ctrl: ctrl.clone(), cum_length: Vec::new(), coarse: Vec::new(), cells: Vec::new() };
        if curve.signed_area() < 0.0 {
            ctrl.reverse();
            curve.ctrl = ctrl;
        }
        curve.build_tables();
        curve
    }

    pub fn control_points(&self) -> &[[f64; 2]] {
        &self.ctrl
    }

    pub fn segments(&self) -> usize {
        self.ctrl.len()
    }

    fn eval_with(&self, s: f64, f: fn(f64) -> [f64; 4]) -> [f64; 2] {
        let n = self.ctrl.len();
        let s = s.rem_euclid(n as f64);
        let seg = (s.floor() as usize).min(n - 1);
        let w = f(s - seg as f64);
        let mut out = [0.0; 2];
        for (k, wk) in w.iter().enumerate() {
            let p = self.ctrl[(seg + k) % n];
            out[0] += wk * p[0];
            out[1] += wk * p[1];
        }
        out
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        self.eval_with(s, basis)
    }

    pub fn tangent(&self, s: f64) -> [f64; 2] {
        self.eval_with(s, basis_d1)
    }

    pub fn second_derivative(&self, s: f64) -> [f64; 2] {
        self.eval_with(s, basis_d2)
    }

    fn speed(&self, s: f64) -> f64 {
        let t = self.tangent(s);
        t[0].hypot(t[1])
    }

    /// Unit outward normal at parameter `s` (right-hand normal of a CCW curve).
    pub fn outward_normal(&self, s: f64) -> [f64; 2] {
        let t = self.tangent(s);
        let len = t[0].hypot(t[1]);
        [t[1] / len, -t[0] / len]
    }

    fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GL8.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// Enclosed area by Green's theorem; exact for the polynomial integrand.
    pub fn signed_area(&self) -> f64 {
        (0..self.ctrl.len())
            .map(|seg| {
                self.integrate(seg as f64, seg as f64 + 1.0, |s| {
                    let p = self.point(s);
                    let t = self.tangent(s);
                    0.5 * (p[0] * t[1] - p[1] * t[0])
                })
            })
            .sum()
    }

    pub fn length(&self) -> f64 {
        *self.cum_length.last().unwrap()
    }

    fn build_tables(&mut self) {
        let n = self.ctrl.len();
        let mut cum = Vec::with_capacity(n * ARC_SUBDIVISIONS + 1);
        cum.push(0.0);
        let h = 1.0 / ARC_SUBDIVISIONS as f64;
        for k in 0..n * ARC_SUBDIVISIONS {
            let a = k as f64 * h;
            let piece = self.integrate(a, a + h, |s| self.speed(s));
            cum.push(cum.last().unwrap() + piece);
        }
        self.cum_length = cum;
        self.coarse = (0..n * COARSE_PER_SEGMENT)
            .map(|k| self.point(k as f64 / COARSE_PER_SEGMENT as f64))
            .collect();

        let (lo, hi) = self.bounding_box();
        let (cw, ch) = ((hi[0] - lo[0]) / CELL_GRID as f64, (hi[1] - lo[1]) / CELL_GRID as f64);
        let half_diag = 0.5 * cw.hypot(ch);
        let mut cells = Vec::with_capacity(CELL_GRID * CELL_GRID);
        for j in 0..CELL_GRID {
            for i in 0..CELL_GRID {
                let c = [lo[0] + (i as f64 + 0.5) * cw, lo[1] + (j as f64 + 0.5) * ch];
                let d = self.signed_distance(c);
                cells.push(if d < -1.01 * half_diag {
                    -1
                } else if d > 1.01 * half_diag {
                    1
                } else {
                    0
                });
            }
        }
        self.cells = cells;
    }

    /// Strict interior test: points within `tol` of the curve are not inside.
    pub fn is_inside(&self, p: [f64; 2], tol: f64) -> bool {
        let (lo, hi) = self.bounding_box();
        if p[0] <= lo[0] || p[0] >= hi[0] || p[1] <= lo[1] || p[1] >= hi[1] {
            return false;
        }
        let i = (((p[0] - lo[0]) / (hi[0] - lo[0]) * CELL_GRID as f64) as usize).min(CELL_GRID - 1);
        let j = (((p[1] - lo[1]) / (hi[1] - lo[1]) * CELL_GRID as f64) as usize).min(CELL_GRID - 1);
        match self.cells[j * CELL_GRID + i] {
            -1 => true,
            1 => false,
            _ => self.signed_distance(p) < -tol,
        }
    }

    /// Curve parameter at arc length `target` from `s = 0`.
    pub fn param_at_length(&self, target: f64) -> f64 {
        let total = self.length();
        let target = target.rem_euclid(total);
        let k = match self.cum_length.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(k) => return k as f64 / ARC_SUBDIVISIONS as f64,
            Err(k) => k - 1,
        };
        let h = 1.0 / ARC_SUBDIVISIONS as f64;
        let s0 = k as f64 * h;
        let (c0, c1) = (self.cum_length[k], self.cum_length[k + 1]);
        let mut s = s0 + h * (target - c0) / (c1 - c0);
        for _ in 0..20 {
            let residual = c0 + self.integrate(s0, s, |u| self.speed(u)) - target;
            let step = residual / self.speed(s);
            s = (s - step).clamp(s0, s0 + h);
            if step.abs() < 1e-15 {
                break;
            }
        }
        s
    }

    /// Closest curve parameter to `p` and the distance to it.
    pub fn closest(&self, p: [f64; 2]) -> (f64, f64) {
        let dist2 = |q: [f64; 2]| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        let m = self.coarse.len();
        let d2: Vec<f64> = self.coarse.iter().map(|&q| dist2(q)).collect();
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(4);
        for i in 0..m {
            if d2[i] <= d2[(i + m - 1) % m] && d2[i] <= d2[(i + 1) % m] {
                best.push((i, d2[i]));
            }
        }
        best.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        best.truncate(3);

        let h = 1.0 / COARSE_PER_SEGMENT as f64;
        let mut result = (0.0, f64::INFINITY);
        for (i, _) in best {
            let centre = i as f64 * h;
            let (lo, hi) = (centre - h, centre + h);
            let mut s = centre;
            for _ in 0..30 {
                let q = self.point(s);
                let t = self.tangent(s);
                let a = self.second_derivative(s);
                let diff = [q[0] - p[0], q[1] - p[1]];
                let g = diff[0] * t[0] + diff[1] * t[1];
                let dg = t[0] * t[0] + t[1] * t[1] + diff[0] * a[0] + diff[1] * a[1];
                let step = if dg > 0.0 { g / dg } else { g.signum() * h * 0.25 };
                s = (s - step).clamp(lo, hi);
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let d = dist2(self.point(s)).sqrt();
            if d < result.1 {
                result = (s.rem_euclid(self.ctrl.len() as f64), d);
            }
        }
        result
    }

    /// Negative inside, positive outside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        let (s, d) = self.closest(p);
        let q = self.point(s);
        let n = self.outward_normal(s);
        let side = (p[0] - q[0]) * n[0] + (p[1] - q[1]) * n[1];
        if side > 0.0 {
            d
        } else {
            -d
        }
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.ctrl {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }
}

/// Control polygon of the convex-ish loop `B1`.
pub fn bspline1_control_points() -> Vec<[f64; 2]> {
    vec![
        [1.0, 0.0],
        [0.7, 0.6],
        [0.0, 0.9],
        [-0.65, 0.7],
        [-1.0, 0.0],
        [-0.7, -0.65],
        [0.0, -0.85],
        [0.6, -0.7],
    ]
}

/// Control polygon of `B2`, which has a concave lobe at the top.
pub fn bspline2_control_points() -> Vec<[f64; 2]> {
    vec![
        [1.0, 0.0],
        [0.8, 0.8],
        [0.0, 0.35],
        [-0.8, 0.8],
        [-1.0, 0.0],
        [-0.7, -0.7],
        [0.0, -0.9],
        [0.7, -0.7],
    ]
}

/// Control polygon whose spline approximates a circle; handy in tests.
#[cfg(test)]
pub(crate) fn regular_polygon(n: usize, radius: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}
