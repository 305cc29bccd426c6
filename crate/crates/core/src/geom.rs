//! Low-level geometry: points, boxes, balls, capsules, parallelepipeds, convex
//! polygons, affine maps, and the planar box sandwich.
//!
//! All bodies are closed. Containment tests accept points within [`TOL`] of the
//! boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::linalg;
use crate::{Error, Result};

/// Absolute tolerance used by every containment test.
pub const TOL: f64 = 1e-9;

/// A point of `ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point of dimension 0".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(a: [f64; N]) -> Self {
        Point(a.to_vec())
    }
}

/// Volume of the unit ball in `ℝ^j`.
pub fn unit_ball_volume(j: usize) -> f64 {
    match j {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / j as f64 * unit_ball_volume(j - 2),
    }
}

/// A closed region with a membership test and an axis-aligned bounding box.
pub trait Region: Sync {
    fn dim(&self) -> usize;

    /// Membership without the dimension check.
    fn contains_unchecked(&self, p: &[f64]) -> bool;

    /// Axis-aligned bounding box `(lo, hi)`.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);

    fn contains(&self, p: &[f64]) -> Result<bool> {
        check_dim(self.dim(), p.len())?;
        Ok(self.contains_unchecked(p))
    }

    /// A planar convex polygon containing the region, when tighter than the
    /// bounding box.
    fn covering_polygon_2d(&self) -> Option<ConvexPolygon> {
        None
    }
}

/// A body with a closed-form volume.
pub trait Volume {
    fn volume(&self) -> f64;
}

/// Axis-parallel box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::InvalidParameter("box of dimension 0".into()));
        }
        if lo.iter().chain(&hi).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite box corner".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::Degenerate("axis box with lo >= hi".into()));
        }
        Ok(AxisBox { lo, hi })
    }

    /// The sup-norm cube `Q_t = {‖x‖_∞ ≤ t}`.
    pub fn cube(dim: usize, t: f64) -> Result<Self> {
        AxisBox::new(vec![-t; dim], vec![t; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn side(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn to_oriented(&self) -> OrientedBox {
        let d = self.dim();
        OrientedBox {
            center: self.center(),
            frame: linalg::identity(d),
            half_extents: (0..d).map(|i| 0.5 * self.side(i)).collect(),
        }
    }

    /// Whether `other` lies inside this box (closed, with tolerance).
    pub fn contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        (0..self.dim()).all(|i| lo[i] >= self.lo[i] - TOL && hi[i] <= self.hi[i] + TOL)
    }
}

impl Region for AxisBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn contains_unchecked(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| *x >= l - TOL && *x <= h + TOL)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }
}

impl Volume for AxisBox {
    fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }
}

/// Euclidean ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("bad ball center".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Degenerate("ball radius must be positive".into()));
        }
        Ok(Ball { center, radius })
    }
}

impl Region for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn contains_unchecked(&self, p: &[f64]) -> bool {
        let d2: f64 = p.iter().zip(&self.center).map(|(x, c)| (x - c) * (x - c)).sum();
        d2.sqrt() <= self.radius + TOL
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.center.iter().map(|c| c - self.radius).collect(), self.center.iter().map(|c| c + self.radius).collect())
    }
}

impl Volume for Ball {
    fn volume(&self) -> f64 {
        unit_ball_volume(self.center.len()) * self.radius.powi(self.center.len() as i32)
    }
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for i in 0..p.len() {
        let ab = b[i] - a[i];
        ab2 += ab * ab;
        ap_ab += (p[i] - a[i]) * ab;
    }
    let s = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let mut d2 = 0.0;
    for i in 0..p.len() {
        let q = a[i] + s * (b[i] - a[i]);
        d2 += (p[i] - q) * (p[i] - q);
    }
    d2.sqrt()
}

/// The closed `radius`-neighbourhood of the segment `[a, b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec<f64>, b: Vec<f64>, radius: f64) -> Result<Self> {
        check_dim(a.len(), b.len())?;
        if a.is_empty() || a.iter().chain(&b).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("bad capsule endpoints".into()));
        }
        if a == b {
            return Err(Error::Degenerate("capsule endpoints coincide".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Degenerate("capsule radius must be positive".into()));
        }
        Ok(Capsule { a, b, radius })
    }

    pub fn length(&self) -> f64 {
        self.a.iter().zip(&self.b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

impl Region for Capsule {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn contains_unchecked(&self, p: &[f64]) -> bool {
        point_segment_distance(p, &self.a, &self.b) <= self.radius + TOL
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.a.iter().zip(&self.b).map(|(x, y)| x.min(*y) - self.radius).collect(),
            self.a.iter().zip(&self.b).map(|(x, y)| x.max(*y) + self.radius).collect(),
        )
    }

    fn covering_polygon_2d(&self) -> Option<ConvexPolygon> {
        if self.dim() != 2 {
            return None;
        }
        let len = self.length();
        let u = [(self.b[0] - self.a[0]) / len, (self.b[1] - self.a[1]) / len];
        let mid = [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])];
        let r = self.radius * (1.0 + 1e-12) + TOL;
        OrientedBox::new(mid.to_vec(), vec![u[0], -u[1], u[1], u[0]], vec![0.5 * len + r, r])
            .ok()
            .map(|b| b.to_polygon())
    }
}

impl Volume for Capsule {
    fn volume(&self) -> f64 {
        let d = self.a.len();
        self.length() * unit_ball_volume(d - 1) * self.radius.powi(d as i32 - 1)
            + unit_ball_volume(d) * self.radius.powi(d as i32)
    }
}

/// Rectangular parallelepiped with an orthonormal frame.
///
/// `frame` is row-major `d×d`; its columns are the edge directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec<f64>,
    pub frame: Vec<f64>,
    pub half_extents: Vec<f64>,
}

impl OrientedBox {
    pub fn new(center: Vec<f64>, frame: Vec<f64>, half_extents: Vec<f64>) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::InvalidParameter("box of dimension 0".into()));
        }
        check_dim(d, half_extents.len())?;
        check_dim(d * d, frame.len())?;
        if half_extents.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::Degenerate("half extents must be positive".into()));
        }
        let ftf = linalg::mat_mul(&linalg::transpose(&frame, d), &frame, d);
        for i in 0..d {
            for j in 0..d {
                let e = if i == j { 1.0 } else { 0.0 };
                if (ftf[i * d + j] - e).abs() > 1e-9 {
                    return Err(Error::InvalidParameter("frame is not orthonormal".into()));
                }
            }
        }
        Ok(OrientedBox { center, frame, half_extents })
    }

    /// Planar box rotated by `theta` (first edge direction `(cos θ, sin θ)`).
    pub fn from_angle(center: [f64; 2], theta: f64, half_extents: [f64; 2]) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        OrientedBox::new(center.to_vec(), vec![c, -s, s, c], half_extents.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Coordinates of `p` in the box frame, relative to the center.
    pub fn local(&self, p: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = p.iter().zip(&self.center).map(|(x, c)| x - c).collect();
        linalg::mat_t_vec(&self.frame, self.dim(), &diff)
    }

    /// Edge direction `i` (column `i` of the frame).
    pub fn axis(&self, i: usize) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|r| self.frame[r * d + i]).collect()
    }

    /// All `2^d` vertices.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                let mut v = self.center.clone();
                for i in 0..d {
                    let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    for (r, vr) in v.iter_mut().enumerate() {
                        *vr += s * self.half_extents[i] * self.frame[r * d + i];
                    }
                }
                v
            })
            .collect()
    }

    /// Planar corners in counterclockwise order.
    pub fn corners_2d(&self) -> [[f64; 2]; 4] {
        let u = [self.frame[0], self.frame[2]];
        let v = [self.frame[1], self.frame[3]];
        let (a, b) = (self.half_extents[0], self.half_extents[1]);
        let c = [self.center[0], self.center[1]];
        let pt = |sa: f64, sb: f64| [c[0] + sa * a * u[0] + sb * b * v[0], c[1] + sa * a * u[1] + sb * b * v[1]];
        let mut out = [pt(-1.0, -1.0), pt(1.0, -1.0), pt(1.0, 1.0), pt(-1.0, 1.0)];
        if polygon_signed_area(&out) < 0.0 {
            out.reverse();
        }
        out
    }

    pub fn to_polygon(&self) -> ConvexPolygon {
        ConvexPolygon { vertices: self.corners_2d().to_vec() }
    }

    pub fn to_parallelepiped(&self) -> Parallelepiped {
        let d = self.dim();
        let mut gens = self.frame.clone();
        for r in 0..d {
            for c in 0..d {
                gens[r * d + c] *= self.half_extents[c];
            }
        }
        Parallelepiped { center: self.center.clone(), generators: gens }
    }
}

impl Region for OrientedBox {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn contains_unchecked(&self, p: &[f64]) -> bool {
        self.local(p).iter().zip(&self.half_extents).all(|(x, h)| x.abs() <= h + TOL)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = self.center.clone();
        let mut hi = self.center.clone();
        for r in 0..d {
            let reach: f64 = (0..d).map(|c| (self.frame[r * d + c] * self.half_extents[c]).abs()).sum();
            lo[r] -= reach;
            hi[r] += reach;
        }
        (lo, hi)
    }

    fn covering_polygon_2d(&self) -> Option<ConvexPolygon> {
        (self.dim() == 2).then(|| self.to_polygon())
    }
}

impl Volume for OrientedBox {
    fn volume(&self) -> f64 {
        (1u64 << self.dim()) as f64 * self.half_extents.iter().product::<f64>()
    }
}

/// `center + generators·[-1,1]^d`; the affine image of a box.
///
/// `generators` is row-major `d×d`; its columns are half-edge vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parallelepiped {
    pub center: Vec<f64>,
    pub generators: Vec<f64>,
}

impl Parallelepiped {
    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

impl Region for Parallelepiped {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn contains_unchecked(&self, p: &[f64]) -> bool {
        let d = self.dim();
        let Ok(inv) = linalg::inverse(&self.generators, d) else {
            return false;
        };
        let diff: Vec<f64> = p.iter().zip(&self.center).map(|(x, c)| x - c).collect();
        // Tolerance is applied in ambient units via the generator column lengths.
        let local = linalg::mat_vec(&inv, d, &diff);
        (0..d).all(|c| {
            let len: f64 = (0..d).map(|r| self.generators[r * d + c].powi(2)).sum::<f64>().sqrt();
            local[c].abs() <= 1.0 + TOL / len
        })
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = self.center.clone();
        let mut hi = self.center.clone();
        for r in 0..d {
            let reach: f64 = (0..d).map(|c| self.generators[r * d + c].abs()).sum();
            lo[r] -= reach;
            hi[r] += reach;
        }
        (lo, hi)
    }

    fn covering_polygon_2d(&self) -> Option<ConvexPolygon> {
        if self.dim() != 2 {
            return None;
        }
        let g = &self.generators;
        let c = &self.center;
        let pts: Vec<[f64; 2]> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|(a, b)| [c[0] + a * g[0] + b * g[1], c[1] + a * g[2] + b * g[3]])
            .collect();
        ConvexPolygon::hull(&pts).ok()
    }
}

impl Volume for Parallelepiped {
    fn volume(&self) -> f64 {
        (1u64 << self.dim()) as f64 * linalg::det(&self.generators, self.dim()).abs()
    }
}

/// `x ↦ linear·x + translation`; `linear` is row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: Vec<f64>,
    pub translation: Vec<f64>,
}

impl AffineMap {
    pub fn new(linear: Vec<f64>, translation: Vec<f64>) -> Result<Self> {
        let d = translation.len();
        check_dim(d * d, linear.len())?;
        if linear.iter().chain(&translation).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite affine map".into()));
        }
        Ok(AffineMap { linear, translation })
    }

    /// An element of `ASL_d(ℝ)`: rejects maps with `|det − 1| > 1e-9`.
    pub fn volume_preserving(linear: Vec<f64>, translation: Vec<f64>) -> Result<Self> {
        let m = AffineMap::new(linear, translation)?;
        let det = m.det();
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("det = {det}, expected 1")));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap { linear: linalg::identity(dim), translation: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn det(&self) -> f64 {
        linalg::det(&self.linear, self.dim())
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.dim();
        let inv = linalg::inverse(&self.linear, d)?;
        let t = linalg::mat_vec(&inv, d, &self.translation);
        Ok(AffineMap { linear: inv, translation: t.iter().map(|x| -x).collect() })
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), p.len())?;
        Ok(self.apply_unchecked(p))
    }

    pub(crate) fn apply_unchecked(&self, p: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = self.translation.clone();
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..d {
                *o += self.linear[i * d + j] * p[j];
            }
        }
        out
    }

    pub fn apply_point(&self, p: &Point) -> Result<Point> {
        Ok(Point(self.apply(p)?))
    }

    pub fn apply_parallelepiped(&self, b: &Parallelepiped) -> Result<Parallelepiped> {
        let d = self.dim();
        check_dim(d, b.dim())?;
        Ok(Parallelepiped {
            center: self.apply_unchecked(&b.center),
            generators: linalg::mat_mul(&self.linear, &b.generators, d),
        })
    }

    pub fn apply_box(&self, b: &OrientedBox) -> Result<Parallelepiped> {
        self.apply_parallelepiped(&b.to_parallelepiped())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> Result<AffineMap> {
        let d = self.dim();
        check_dim(d, other.dim())?;
        Ok(AffineMap {
            linear: linalg::mat_mul(&self.linear, &other.linear, d),
            translation: self.apply_unchecked(&other.translation),
        })
    }
}

pub(crate) fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace area, positive for counterclockwise vertex order.
pub fn polygon_signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

pub(crate) fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn point_segment_distance_2d(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if l2 > 0.0 { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    dist2(p, [a[0] + s * ab[0], a[1] + s * ab[1]])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Distance between closed planar segments `[a, b]` and `[c, d]`.
pub fn segment_segment_distance_2d(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance_2d(a, c, d)
        .min(point_segment_distance_2d(b, c, d))
        .min(point_segment_distance_2d(c, a, b))
        .min(point_segment_distance_2d(d, a, b))
}

/// Closed simple polygon membership (boundary counts as inside).
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if point_segment_distance_2d(p, a, b) <= TOL {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to the boundary of a polygon.
pub fn distance_to_polygon_boundary(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| point_segment_distance_2d(p, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

/// Convex polygon with counterclockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<[f64; 2]>,
}

impl ConvexPolygon {
    /// Convex hull of `points` (Andrew's monotone chain).
    pub fn hull(points: &[[f64; 2]]) -> Result<Self> {
        let mut pts: Vec<[f64; 2]> = points.to_vec();
        if pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidParameter("non-finite polygon vertex".into()));
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        if pts.len() < 3 {
            return Err(Error::Degenerate("fewer than 3 distinct vertices".into()));
        }
        let mut lower: Vec<[f64; 2]> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<[f64; 2]> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        let poly = ConvexPolygon { vertices: lower };
        let scale = poly.vertices.iter().map(|v| v[0].abs().max(v[1].abs())).fold(1.0, f64::max);
        if poly.vertices.len() < 3 || poly.area() <= 1e-12 * scale * scale {
            return Err(Error::Degenerate("collinear polygon".into()));
        }
        Ok(poly)
    }

    pub fn area(&self) -> f64 {
        polygon_signed_area(&self.vertices).abs()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let len = dist2(a, b);
            cross(a, b, p) >= -TOL * len
        })
    }

    /// Keeps the part with `normal·x ≤ offset` (Sutherland–Hodgman step).
    pub fn clip(&self, normal: [f64; 2], offset: f64) -> Option<ConvexPolygon> {
        let f = |p: [f64; 2]| normal[0] * p[0] + normal[1] * p[1] - offset;
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let (fa, fb) = (f(a), f(b));
            if fa <= 0.0 {
                out.push(a);
            }
            if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
                let s = fa / (fa - fb);
                out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            }
        }
        if out.len() < 3 {
            return None;
        }
        let poly = ConvexPolygon { vertices: out };
        (poly.area() > 0.0).then_some(poly)
    }
}

/// Minimum-area enclosing rectangle of a convex polygon.
///
/// One side of the optimum is collinear with a hull edge, so every edge
/// direction is tried.
pub fn min_area_bounding_rect(k: &ConvexPolygon) -> OrientedBox {
    let v = &k.vertices;
    let n = v.len();
    let mut best: Option<(f64, OrientedBox)> = None;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let len = dist2(a, b);
        if len == 0.0 {
            continue;
        }
        let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let w = [-u[1], u[0]];
        let (mut u0, mut u1, mut w0, mut w1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in v {
            let pu = p[0] * u[0] + p[1] * u[1];
            let pw = p[0] * w[0] + p[1] * w[1];
            u0 = u0.min(pu);
            u1 = u1.max(pu);
            w0 = w0.min(pw);
            w1 = w1.max(pw);
        }
        let area = (u1 - u0) * (w1 - w0);
        if best.as_ref().is_none_or(|(ba, _)| area < *ba) {
            let cu = 0.5 * (u0 + u1);
            let cw = 0.5 * (w0 + w1);
            let center = [cu * u[0] + cw * w[0], cu * u[1] + cw * w[1]];
            let bx = OrientedBox {
                center: center.to_vec(),
                frame: vec![u[0], w[0], u[1], w[1]],
                half_extents: vec![0.5 * (u1 - u0), 0.5 * (w1 - w0)],
            };
            best = Some((area, bx));
        }
    }
    best.expect("polygon has at least one edge").1
}

/// Horizontal chord `[xl, xr]` of a convex polygon at height `y`.
fn chord(v: &[[f64; 2]], y: f64) -> Option<(f64, f64)> {
    let n = v.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let (ylo, yhi) = (a[1].min(b[1]), a[1].max(b[1]));
        if y < ylo || y > yhi {
            continue;
        }
        if a[1] == b[1] {
            lo = lo.min(a[0].min(b[0]));
            hi = hi.max(a[0].max(b[0]));
        } else {
            let x = a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Area of the best axis rectangle spanning heights `[y0, y1]` inside a convex
/// polygon. The left chord end is convex in `y` and the right end concave, so
/// the binding constraints sit at the two endpoints.
fn slab_rect(v: &[[f64; 2]], y0: f64, y1: f64) -> Option<(f64, f64, f64)> {
    if y1 <= y0 {
        return None;
    }
    let (l0, r0) = chord(v, y0)?;
    let (l1, r1) = chord(v, y1)?;
    let (l, r) = (l0.max(l1), r0.min(r1));
    (r > l).then_some(((r - l) * (y1 - y0), l, r))
}

struct Inscribed {
    area: f64,
    theta: f64,
    y0: f64,
    y1: f64,
    l: f64,
    r: f64,
}

fn best_at_angle(k: &ConvexPolygon, theta: f64, grid: usize) -> Option<Inscribed> {
    let (s, c) = theta.sin_cos();
    // Rotate by −θ so the candidate rectangle is axis-aligned.
    let v: Vec<[f64; 2]> = k.vertices.iter().map(|p| [c * p[0] + s * p[1], -s * p[0] + c * p[1]]).collect();
    let ymin = v.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let ymax = v.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let h = ymax - ymin;
    let ys: Vec<f64> = (0..=grid).map(|i| ymin + h * i as f64 / grid as f64).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..ys.len() {
        for j in i + 1..ys.len() {
            if let Some((a, _, _)) = slab_rect(&v, ys[i], ys[j]) {
                if best.is_none_or(|b| a > b.0) {
                    best = Some((a, ys[i], ys[j]));
                }
            }
        }
    }
    let (_, mut y0, mut y1) = best?;
    let mut step = h / grid as f64;
    for _ in 0..40 {
        let mut improved = false;
        let cur = slab_rect(&v, y0, y1).map_or(0.0, |r| r.0);
        for (dy0, dy1) in [(-step, 0.0), (step, 0.0), (0.0, -step), (0.0, step), (-step, step), (step, -step)] {
            let (a0, a1) = ((y0 + dy0).max(ymin), (y1 + dy1).min(ymax));
            if let Some((a, _, _)) = slab_rect(&v, a0, a1) {
                if a > cur {
                    y0 = a0;
                    y1 = a1;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let (area, l, r) = slab_rect(&v, y0, y1)?;
    Some(Inscribed { area, theta, y0, y1, l, r })
}

const GOLDEN_FRAC: f64 = 0.618_033_988_749_894_9;

/// Large inscribed rectangle of a convex polygon by an angle grid (720 jittered
/// angles plus every edge direction) followed by local refinement.
pub fn large_inscribed_rect(k: &ConvexPolygon) -> OrientedBox {
    let quarter = 0.5 * PI;
    let step = quarter / 720.0;
    let mut angles: Vec<f64> = (0..720).map(|i| (i as f64 + ((i + 1) as f64 * GOLDEN_FRAC).fract()) * step).collect();
    let n = k.vertices.len();
    for i in 0..n {
        let (a, b) = (k.vertices[i], k.vertices[(i + 1) % n]);
        angles.push((b[1] - a[1]).atan2(b[0] - a[0]).rem_euclid(quarter));
    }
    let mut best: Option<Inscribed> = None;
    for &t in &angles {
        if let Some(c) = best_at_angle(k, t, 24) {
            if best.as_ref().is_none_or(|b| c.area > b.area) {
                best = Some(c);
            }
        }
    }
    let mut best = best.expect("non-degenerate polygon has an inscribed rectangle");
    let mut span = step;
    for _ in 0..3 {
        let centre = best.theta;
        for i in -4i32..=4 {
            let t = centre + span * f64::from(i) / 4.0;
            if let Some(c) = best_at_angle(k, t, 48) {
                if c.area > best.area {
                    best = c;
                }
            }
        }
        span *= 0.25;
    }
    let (s, c) = best.theta.sin_cos();
    let cx = 0.5 * (best.l + best.r);
    let cy = 0.5 * (best.y0 + best.y1);
    OrientedBox {
        center: vec![c * cx - s * cy, s * cx + c * cy],
        frame: vec![c, -s, s, c],
        half_extents: vec![0.5 * (best.r - best.l), 0.5 * (best.y1 - best.y0)],
    }
}

/// Result of [`box_sandwich_2d`]: `inner ⊆ K ⊆ outer`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxSandwich {
    pub inner: OrientedBox,
    pub outer: OrientedBox,
    pub ratio: f64,
}

/// Planar boxes `R1 ⊆ K ⊆ R2`; both containments and the ratio bound `36` are
/// checked, not assumed.
pub fn box_sandwich_2d(k: &ConvexPolygon) -> Result<BoxSandwich> {
    let k = ConvexPolygon::hull(&k.vertices)?;
    let outer = min_area_bounding_rect(&k);
    let inner = large_inscribed_rect(&k);
    for c in inner.corners_2d() {
        if !k.contains(c) {
            return Err(Error::VerificationFailed("inscribed box leaves polygon".into()));
        }
    }
    for v in &k.vertices {
        if !outer.contains_unchecked(v) {
            return Err(Error::VerificationFailed("polygon leaves enclosing box".into()));
        }
    }
    let ratio = outer.volume() / inner.volume();
    if ratio > 36.0 {
        return Err(Error::VerificationFailed(format!("sandwich ratio {ratio} > 36")));
    }
    Ok(BoxSandwich { inner, outer, ratio })
}

/// Sandwich for a polytope in any dimension, given its vertices and
/// H-representation `a·x ≤ b`. The outer box is the axis bounding box; the
/// inner box shrinks it about the vertex centroid until all corners satisfy
/// the inequalities. No ratio guarantee is made.
pub fn box_sandwich_hrep(vertices: &[Vec<f64>], halfspaces: &[(Vec<f64>, f64)]) -> Result<(AxisBox, AxisBox)> {
    let first = vertices.first().ok_or_else(|| Error::Degenerate("no vertices".into()))?;
    let d = first.len();
    let mut lo = first.clone();
    let mut hi = first.clone();
    for v in vertices {
        check_dim(d, v.len())?;
        for i in 0..d {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    let outer = AxisBox::new(lo.clone(), hi.clone())?;
    let centroid: Vec<f64> =
        (0..d).map(|i| vertices.iter().map(|v| v[i]).sum::<f64>() / vertices.len() as f64).collect();
    let fits = |s: f64| {
        (0..1usize << d).all(|mask| {
            let corner: Vec<f64> = (0..d)
                .map(|i| {
                    let e = if mask >> i & 1 == 1 { hi[i] } else { lo[i] };
                    centroid[i] + s * (e - centroid[i])
                })
                .collect();
            halfspaces.iter().all(|(a, b)| linalg::dot(a, &corner) <= b + TOL)
        })
    };
    let (mut s_lo, mut s_hi) = (0.0, 1.0);
    if fits(1.0) {
        s_lo = 1.0;
    } else {
        for _ in 0..60 {
            let m = 0.5 * (s_lo + s_hi);
            if fits(m) {
                s_lo = m;
            } else {
                s_hi = m;
            }
        }
    }
    let ilo: Vec<f64> = (0..d).map(|i| centroid[i] + s_lo * (lo[i] - centroid[i])).collect();
    let ihi: Vec<f64> = (0..d).map(|i| centroid[i] + s_lo * (hi[i] - centroid[i])).collect();
    Ok((AxisBox::new(ilo, ihi)?, outer))
}
