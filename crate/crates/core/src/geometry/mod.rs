//! The six domain shapes: unit square, disk, two closed B-spline loops,
//! corner-cut cube and ellipsoid.

mod bspline;
mod sampling;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bspline::{bspline1_control_points, bspline2_control_points, ClosedBSpline};
pub use sampling::{lhs, lhs_with, sample_boundary, sample_boundary_with, sample_interior, sample_interior_with, SampleBatch};

/// Points within this distance of the boundary count as boundary points.
pub const BOUNDARY_TOL: f64 = 1e-8;

/// Points closer than this to the boundary are not interior.
const INTERIOR_MARGIN: f64 = 1e-12;

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn default_semi_axes() -> [f64; 3] {
    [1.0, 0.75, 0.5]
}

/// Serializable description of a domain, as it appears in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Square {
        #[serde(default)]
        origin: [f64; 2],
        #[serde(default = "one")]
        side: f64,
    },
    Circle {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "one")]
        radius: f64,
    },
    Bspline1 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        control_points: Option<Vec<[f64; 2]>>,
    },
    Bspline2 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        control_points: Option<Vec<[f64; 2]>>,
    },
    /// Cube `[origin, origin + side]³` minus the open corner octant above
    /// `origin + cut·side` in every coordinate.
    CutCube {
        #[serde(default)]
        origin: [f64; 3],
        #[serde(default = "one")]
        side: f64,
        #[serde(default = "half")]
        cut: f64,
    },
    Ellipsoid {
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "default_semi_axes")]
        semi_axes: [f64; 3],
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Square,
    Circle,
    BSpline1,
    BSpline2,
    CutCube,
    Ellipsoid,
}

impl ShapeKind {
    pub fn short_name(self) -> &'static str {
        match self {
            ShapeKind::Square => "SQ",
            ShapeKind::Circle => "CR",
            ShapeKind::BSpline1 => "B1",
            ShapeKind::BSpline2 => "B2",
            ShapeKind::CutCube => "CC",
            ShapeKind::Ellipsoid => "EP",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Square { lo: [f64; 2], side: f64 },
    Circle { center: [f64; 2], radius: f64 },
    Spline(Box<ClosedBSpline>),
    CutCube { lo: [f64; 3], side: f64, cut: f64 },
    Ellipsoid { center: [f64; 3], axes: [f64; 3], area: f64 },
}

/// Axis-aligned rectangle on a face of the cut cube: the point is
/// `lo + a·(span along axis u) + b·(span along axis v)` at fixed `axis = level`.
#[derive(Clone, Copy, Debug)]
struct FacePatch {
    axis: usize,
    level: f64,
    normal_sign: f64,
    u: (usize, f64, f64),
    v: (usize, f64, f64),
}

impl FacePatch {
    fn area(&self) -> f64 {
        (self.u.2 - self.u.1) * (self.v.2 - self.v.1)
    }

    fn point(&self, a: f64, b: f64) -> [f64; 3] {
        let mut p = [0.0; 3];
        p[self.axis] = self.level;
        p[self.u.0] = self.u.1 + a * (self.u.2 - self.u.1);
        p[self.v.0] = self.v.1 + b * (self.v.2 - self.v.1);
        p
    }

    /// Distance from `p` to the patch when `p` projects into it.
    fn distance(&self, p: &[f64]) -> Option<f64> {
        let within = |(axis, lo, hi): (usize, f64, f64)| p[axis] >= lo - BOUNDARY_TOL && p[axis] <= hi + BOUNDARY_TOL;
        (within(self.u) && within(self.v)).then(|| (p[self.axis] - self.level).abs())
    }
}

fn cut_cube_patches(lo: [f64; 3], side: f64, cut: f64) -> Vec<FacePatch> {
    let mut patches = Vec::with_capacity(12);
    for axis in 0..3 {
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        let (l_u, l_v) = (lo[ua], lo[va]);
        let (h_u, h_v) = (l_u + side, l_v + side);
        let (c_u, c_v) = (l_u + cut * side, l_v + cut * side);
        patches.push(FacePatch { axis, level: lo[axis], normal_sign: -1.0, u: (ua, l_u, h_u), v: (va, l_v, h_v) });
        // the far face is an L shape: a full-height strip plus the lower corner block
        let far = lo[axis] + side;
        patches.push(FacePatch { axis, level: far, normal_sign: 1.0, u: (ua, l_u, c_u), v: (va, l_v, h_v) });
        patches.push(FacePatch { axis, level: far, normal_sign: 1.0, u: (ua, c_u, h_u), v: (va, l_v, c_v) });
        // wall of the removed octant; the solid lies below it
        let wall = lo[axis] + cut * side;
        patches.push(FacePatch { axis, level: wall, normal_sign: 1.0, u: (ua, c_u, h_u), v: (va, c_v, h_v) });
    }
    patches
}

fn box_signed_distance(p: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut outside = 0.0;
    let mut inside = f64::NEG_INFINITY;
    for k in 0..p.len() {
        let d = (lo[k] - p[k]).max(p[k] - hi[k]);
        outside += d.max(0.0).powi(2);
        inside = inside.max(d);
    }
    if outside > 0.0 {
        outside.sqrt()
    } else {
        inside
    }
}

/// Surface area of an ellipsoid by midpoint quadrature over the sphere
/// parameterisation `cos θ = 1 − 2u`, `φ = 2πv`.
fn ellipsoid_area(axes: [f64; 3]) -> f64 {
    let n = 400;
    let mut sum = 0.0;
    for i in 0..n {
        let cos_t = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        for j in 0..n {
            let phi = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            sum += ellipsoid_area_density(axes, [sin_t * phi.cos(), sin_t * phi.sin(), cos_t]);
        }
    }
    4.0 * PI * sum / (n * n) as f64
}

/// Ratio of ellipsoid to unit-sphere area element at sphere point `s`.
fn ellipsoid_area_density(axes: [f64; 3], s: [f64; 3]) -> f64 {
    let [a, b, c] = axes;
    ((b * c * s[0]).powi(2) + (a * c * s[1]).powi(2) + (a * b * s[2]).powi(2)).sqrt()
}

/// A validated, immutable domain.
#[derive(Clone, Debug)]
pub struct Domain {
    spec: DomainSpec,
    shape: Shape,
    id: String,
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let shape = match &spec {
            DomainSpec::Square { origin, side } => {
                positive("side", *side)?;
                Shape::Square { lo: *origin, side: *side }
            }
            DomainSpec::Circle { center, radius } => {
                positive("radius", *radius)?;
                Shape::Circle { center: *center, radius: *radius }
            }
            DomainSpec::Bspline1 { control_points } | DomainSpec::Bspline2 { control_points } => {
                let ctrl = match (control_points, &spec) {
                    (Some(c), _) => c.clone(),
                    (None, DomainSpec::Bspline1 { .. }) => bspline1_control_points(),
                    (None, _) => bspline2_control_points(),
                };
                if ctrl.len() < 4 {
                    return Err(Error::Config("a closed B-spline needs at least 4 control points".into()));
                }
                let curve = ClosedBSpline::new(ctrl);
                if curve.signed_area().abs() < 1e-9 {
                    return Err(Error::DegenerateDomain("B-spline loop encloses no area".into()));
                }
                Shape::Spline(Box::new(curve))
            }
            DomainSpec::CutCube { origin, side, cut } => {
                positive("side", *side)?;
                if !(*cut > 0.0 && *cut < 1.0) {
                    return Err(Error::Config(format!("cut fraction must lie in (0, 1), got {cut}")));
                }
                Shape::CutCube { lo: *origin, side: *side, cut: *cut }
            }
            DomainSpec::Ellipsoid { center, semi_axes } => {
                for &a in semi_axes {
                    positive("semi-axis", a)?;
                }
                Shape::Ellipsoid { center: *center, axes: *semi_axes, area: ellipsoid_area(*semi_axes) }
            }
        };
        let id = serde_json::to_string(&spec).expect("domain specs always serialize");
        Ok(Self { spec, shape, id })
    }

    pub fn unit_square() -> Self {
        Self::new(DomainSpec::Square { origin: [0.0; 2], side: 1.0 }).unwrap()
    }

    pub fn unit_disk() -> Self {
        Self::new(DomainSpec::Circle { center: [0.0; 2], radius: 1.0 }).unwrap()
    }

    pub fn bspline1() -> Self {
        Self::new(DomainSpec::Bspline1 { control_points: None }).unwrap()
    }

    pub fn bspline2() -> Self {
        Self::new(DomainSpec::Bspline2 { control_points: None }).unwrap()
    }

    pub fn cut_cube() -> Self {
        Self::new(DomainSpec::CutCube { origin: [0.0; 3], side: 1.0, cut: 0.5 }).unwrap()
    }

    pub fn ellipsoid() -> Self {
        Self::new(DomainSpec::Ellipsoid { center: [0.0; 3], semi_axes: default_semi_axes() }).unwrap()
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    /// Canonical identifier (compact JSON of the spec); equal ids mean equal domains.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> ShapeKind {
        match self.spec {
            DomainSpec::Square { .. } => ShapeKind::Square,
            DomainSpec::Circle { .. } => ShapeKind::Circle,
            DomainSpec::Bspline1 { .. } => ShapeKind::BSpline1,
            DomainSpec::Bspline2 { .. } => ShapeKind::BSpline2,
            DomainSpec::CutCube { .. } => ShapeKind::CutCube,
            DomainSpec::Ellipsoid { .. } => ShapeKind::Ellipsoid,
        }
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Square { .. } | Shape::Circle { .. } | Shape::Spline(_) => 2,
            Shape::CutCube { .. } | Shape::Ellipsoid { .. } => 3,
        }
    }

    pub fn spline(&self) -> Option<&ClosedBSpline> {
        match &self.shape {
            Shape::Spline(c) => Some(c),
            _ => None,
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Square { lo, side } => (lo.to_vec(), vec![lo[0] + side, lo[1] + side]),
            Shape::Circle { center, radius } => {
                (vec![center[0] - radius, center[1] - radius], vec![center[0] + radius, center[1] + radius])
            }
            Shape::Spline(c) => {
                let (lo, hi) = c.bounding_box();
                (lo.to_vec(), hi.to_vec())
            }
            Shape::CutCube { lo, side, .. } => (lo.to_vec(), lo.iter().map(|v| v + side).collect()),
            Shape::Ellipsoid { center, axes, .. } => (
                center.iter().zip(axes).map(|(c, a)| c - a).collect(),
                center.iter().zip(axes).map(|(c, a)| c + a).collect(),
            ),
        }
    }

    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Square { side, .. } => side * side,
            Shape::Circle { radius, .. } => PI * radius * radius,
            Shape::Spline(c) => c.signed_area(),
            Shape::CutCube { side, cut, .. } => side.powi(3) * (1.0 - (1.0 - cut).powi(3)),
            Shape::Ellipsoid { axes, .. } => 4.0 / 3.0 * PI * axes[0] * axes[1] * axes[2],
        }
    }

    /// Perimeter (2D) or surface area (3D).
    pub fn boundary_measure(&self) -> f64 {
        match &self.shape {
            Shape::Square { side, .. } => 4.0 * side,
            Shape::Circle { radius, .. } => 2.0 * PI * radius,
            Shape::Spline(c) => c.length(),
            Shape::CutCube { side, .. } => 6.0 * side * side,
            Shape::Ellipsoid { area, .. } => *area,
        }
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        Ok(())
    }

    /// Strict interior test.
    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        self.check_dim(p)?;
        Ok(self.contains_unchecked(p))
    }

    pub(crate) fn contains_unchecked(&self, p: &[f64]) -> bool {
        match &self.shape {
            Shape::Spline(c) => c.is_inside([p[0], p[1]], INTERIOR_MARGIN),
            _ => self.signed_distance_unchecked(p) < -INTERIOR_MARGIN,
        }
    }

    /// Negative inside, positive outside. Exact for the square, disk and
    /// B-splines; a first-order estimate near the surface for the ellipsoid.
    pub fn signed_distance(&self, p: &[f64]) -> Result<f64> {
        self.check_dim(p)?;
        Ok(self.signed_distance_unchecked(p))
    }

    fn signed_distance_unchecked(&self, p: &[f64]) -> f64 {
        match &self.shape {
            Shape::Square { lo, side } => box_signed_distance(p, lo, &[lo[0] + side, lo[1] + side]),
            Shape::Circle { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) - radius,
            Shape::Spline(c) => c.signed_distance([p[0], p[1]]),
            Shape::CutCube { lo, side, cut } => {
                let hi: Vec<f64> = lo.iter().map(|v| v + side).collect();
                let corner: Vec<f64> = lo.iter().map(|v| v + cut * side).collect();
                box_signed_distance(p, lo, &hi).max(-box_signed_distance(p, &corner, &hi))
            }
            Shape::Ellipsoid { center, axes, .. } => {
                let mut g = -1.0;
                let mut grad2 = 0.0;
                for k in 0..3 {
                    let x = (p[k] - center[k]) / axes[k];
                    g += x * x;
                    grad2 += (2.0 * x / axes[k]).powi(2);
                }
                if grad2 == 0.0 {
                    -axes.iter().copied().fold(f64::INFINITY, f64::min)
                } else {
                    g / grad2.sqrt()
                }
            }
        }
    }

    pub fn boundary_distance(&self, p: &[f64]) -> Result<f64> {
        Ok(self.signed_distance(p)?.abs())
    }

    /// Unit outward normal at a boundary point.
    pub fn boundary_normal(&self, p: &[f64]) -> Result<Vec<f64>> {
        let distance = self.boundary_distance(p)?;
        if distance > BOUNDARY_TOL {
            return Err(Error::NotOnBoundary { distance });
        }
        Ok(match &self.shape {
            Shape::Square { lo, side } => {
                let faces = [
                    ((p[0] - lo[0]).abs(), [-1.0, 0.0]),
                    ((p[0] - lo[0] - side).abs(), [1.0, 0.0]),
                    ((p[1] - lo[1]).abs(), [0.0, -1.0]),
                    ((p[1] - lo[1] - side).abs(), [0.0, 1.0]),
                ];
                let best = faces.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
                best.1.to_vec()
            }
            Shape::Circle { center, radius } => vec![(p[0] - center[0]) / radius, (p[1] - center[1]) / radius],
            Shape::Spline(c) => {
                let (s, _) = c.closest([p[0], p[1]]);
                c.outward_normal(s).to_vec()
            }
            Shape::CutCube { lo, side, cut } => {
                let patches = cut_cube_patches(*lo, *side, *cut);
                let best = patches
                    .iter()
                    .filter_map(|f| f.distance(p).map(|d| (d, f)))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("a boundary point lies on some face");
                let mut n = vec![0.0; 3];
                n[best.1.axis] = best.1.normal_sign;
                n
            }
            Shape::Ellipsoid { center, axes, .. } => {
                let g: Vec<f64> = (0..3).map(|k| (p[k] - center[k]) / (axes[k] * axes[k])).collect();
                let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                g.iter().map(|v| v / len).collect()
            }
        })
    }

    /// Number of boundary parameters (`dim − 1`).
    pub(crate) fn boundary_param_dim(&self) -> usize {
        self.dim() - 1
    }

    /// Whether [`Self::boundary_point`] returns acceptance weights below 1.
    pub(crate) fn boundary_thinning(&self) -> bool {
        matches!(self.shape, Shape::Ellipsoid { .. })
    }

    /// Maps boundary parameters in `[0, 1)^{dim−1}` to a boundary point.
    ///
    /// The map pushes the uniform measure forward to the uniform boundary
    /// measure after the point is kept with the returned acceptance
    /// probability (always 1 except on the ellipsoid).
    pub(crate) fn boundary_point(&self, params: &[f64]) -> (Vec<f64>, f64) {
        match &self.shape {
            Shape::Square { lo, side } => {
                let t = 4.0 * params[0];
                let edge = (t.floor() as usize).min(3);
                let a = (t - edge as f64) * side;
                let p = match edge {
                    0 => [lo[0] + a, lo[1]],
                    1 => [lo[0] + side, lo[1] + a],
                    2 => [lo[0] + side - a, lo[1] + side],
                    _ => [lo[0], lo[1] + side - a],
                };
                (p.to_vec(), 1.0)
            }
            Shape::Circle { center, radius } => {
                let theta = 2.0 * PI * params[0];
                (vec![center[0] + radius * theta.cos(), center[1] + radius * theta.sin()], 1.0)
            }
            Shape::Spline(c) => (c.point(c.param_at_length(params[0] * c.length())).to_vec(), 1.0),
            Shape::CutCube { lo, side, cut } => {
                let patches = cut_cube_patches(*lo, *side, *cut);
                let total: f64 = patches.iter().map(FacePatch::area).sum();
                let mut target = params[0] * total;
                let last = patches.len() - 1;
                for (i, f) in patches.iter().enumerate() {
                    let area = f.area();
                    if target < area || i == last {
                        let a = (target / area).clamp(0.0, 1.0);
                        return (f.point(a, params[1]).to_vec(), 1.0);
                    }
                    target -= area;
                }
                unreachable!()
            }
            Shape::Ellipsoid { center, axes, .. } => {
                let cos_t = 1.0 - 2.0 * params[0];
                let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                let phi = 2.0 * PI * params[1];
                let s = [sin_t * phi.cos(), sin_t * phi.sin(), cos_t];
                let p = (0..3).map(|k| center[k] + axes[k] * s[k]).collect();
                let [a, b, c] = *axes;
                let max_density = (b * c).max(a * c).max(a * b);
                (p, ellipsoid_area_density(*axes, s) / max_density)
            }
        }
    }
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Even-odd ray casting against a polyline.
    fn ray_cast(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    #[test]
    fn simple_membership() {
        assert!(Domain::unit_square().contains(&[0.5, 0.5]).unwrap());
        assert!(!Domain::unit_square().contains(&[1.0, 0.5]).unwrap());
        assert!(!Domain::unit_disk().contains(&[1.0, 0.0]).unwrap());
        assert!(Domain::unit_disk().contains(&[0.0, 0.999]).unwrap());
        assert!(Domain::unit_square().contains(&[0.5, 0.5, 0.5]).is_err());
        let cc = Domain::cut_cube();
        assert!(cc.contains(&[0.25, 0.25, 0.25]).unwrap());
        assert!(cc.contains(&[0.75, 0.75, 0.25]).unwrap());
        assert!(!cc.contains(&[0.75, 0.75, 0.75]).unwrap());
        assert!(Domain::ellipsoid().contains(&[0.9, 0.0, 0.0]).unwrap());
        assert!(!Domain::ellipsoid().contains(&[0.0, 0.0, 0.6]).unwrap());
    }

    #[test]
    fn splines_agree_with_ray_casting() {
        for domain in [Domain::bspline1(), Domain::bspline2()] {
            let curve = domain.spline().unwrap();
            let n = curve.segments() * 2000;
            let poly: Vec<[f64; 2]> = (0..n).map(|k| curve.point(k as f64 * curve.segments() as f64 / n as f64)).collect();
            let mut checked = 0;
            for i in 0..60 {
                for j in 0..60 {
                    let p = [-1.1 + 2.2 * (i as f64 + 0.37) / 60.0, -1.1 + 2.2 * (j as f64 + 0.61) / 60.0];
                    if curve.signed_distance(p).abs() < 1e-5 {
                        continue;
                    }
                    assert_eq!(domain.contains(&p).unwrap(), ray_cast(&poly, p), "{p:?}");
                    checked += 1;
                }
            }
            assert!(checked > 3000);
        }
    }

    #[test]
    fn normals_on_simple_shapes() {
        assert_eq!(Domain::unit_square().boundary_normal(&[1.0, 0.5]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(Domain::unit_disk().boundary_normal(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        let n = Domain::ellipsoid().boundary_normal(&[0.0, 0.0, 0.5]).unwrap();
        assert!((n[2] - 1.0).abs() < 1e-15 && n[0] == 0.0 && n[1] == 0.0);
        let n = Domain::cut_cube().boundary_normal(&[0.5, 0.75, 0.8]).unwrap();
        assert_eq!(n, vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            Domain::unit_square().boundary_normal(&[0.5, 0.5]),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn measures() {
        assert!((Domain::cut_cube().volume() - 0.875).abs() < 1e-15);
        assert_eq!(Domain::cut_cube().boundary_measure(), 6.0);
        // sphere check of the area quadrature
        let sphere = Domain::new(DomainSpec::Ellipsoid { center: [0.0; 3], semi_axes: [1.0; 3] }).unwrap();
        assert!((sphere.boundary_measure() - 4.0 * PI).abs() < 1e-12);
        // prolate spheroid closed form
        let (a, c) = (1.0_f64, 2.0_f64);
        let e = (1.0 - a * a / (c * c)).sqrt();
        let exact = 2.0 * PI * a * a * (1.0 + c / (a * e) * e.asin());
        let spheroid = Domain::new(DomainSpec::Ellipsoid { center: [0.0; 3], semi_axes: [a, a, c] }).unwrap();
        assert!((spheroid.boundary_measure() - exact).abs() / exact < 1e-5);
    }

    #[test]
    fn spec_parsing() {
        let d: DomainSpec = serde_json::from_str(r#"{"shape": "circle"}"#).unwrap();
        assert_eq!(d, DomainSpec::Circle { center: [0.0; 2], radius: 1.0 });
        let d: DomainSpec = serde_json::from_str(r#"{"shape": "cut_cube", "cut": 0.25}"#).unwrap();
        assert_eq!(Domain::new(d).unwrap().kind(), ShapeKind::CutCube);
        assert!(serde_json::from_str::<DomainSpec>(r#"{"shape": "circle", "radus": 2}"#).is_err());
        assert!(serde_json::from_str::<DomainSpec>(r#"{"shape": "torus"}"#).is_err());
        assert!(Domain::new(DomainSpec::Circle { center: [0.0; 2], radius: -1.0 }).is_err());
    }

    #[test]
    fn boundary_parameterisation_lands_on_boundary() {
        for domain in [
            Domain::unit_square(),
            Domain::unit_disk(),
            Domain::bspline1(),
            Domain::bspline2(),
            Domain::cut_cube(),
            Domain::ellipsoid(),
        ] {
            for i in 0..50 {
                let params: Vec<f64> =
                    (0..domain.boundary_param_dim()).map(|k| ((i * 7 + k * 13) as f64 * 0.618).fract()).collect();
                let (p, w) = domain.boundary_point(&params);
                assert!(domain.boundary_distance(&p).unwrap() <= 1e-10, "{:?} {p:?}", domain.kind());
                assert!((0.0..=1.0).contains(&w));
            }
        }
    }
}
