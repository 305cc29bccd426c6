//! Cut-and-project sets `π_phys(L ∩ π_int⁻¹(W))`, exact enumeration inside
//! ellipsoidal regions, and the affine search for large empty balls.
//!
//! Lattice points are enumerated with Fincke–Pohst over an LLL-reduced
//! basis of the product region (physical ellipse × window box), then tested
//! exactly against the region and the closed window.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{unit_ball_volume, AffineMap, Ball, Region, TOL};
use crate::linalg;
use crate::pointset::PointSet;
use crate::rng::substream;
use crate::{Error, Result};

/// Refuse enumerations expected to visit more lattice points than this.
pub const MAX_CANDIDATES: f64 = 5e7;

/// Closed acceptance window in internal space `ℝ^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "lowercase")]
pub enum Window {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `{w : normals[i]·w ≤ offsets[i]}`.
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

impl Window {
    pub fn dim(&self) -> usize {
        match self {
            Window::Box { lo, .. } => lo.len(),
            Window::Polytope { normals, .. } => normals.first().map_or(0, Vec::len),
        }
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        match self {
            Window::Box { lo, hi } => w.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *x >= a - TOL && *x <= b + TOL),
            Window::Polytope { normals, offsets } => {
                normals.iter().zip(offsets).all(|(a, b)| linalg::dot(a, w) <= b + TOL)
            }
        }
    }

    /// Vertices: box corners, or every feasible intersection of `k` facets.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            Window::Box { lo, hi } => {
                let k = lo.len();
                (0..1usize << k)
                    .map(|mask| (0..k).map(|j| if mask >> j & 1 == 1 { hi[j] } else { lo[j] }).collect())
                    .collect()
            }
            Window::Polytope { normals, offsets } => polytope_vertices(normals, offsets),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.dim();
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for v in self.vertices() {
            for j in 0..k {
                lo[j] = lo[j].min(v[j]);
                hi[j] = hi[j].max(v[j]);
            }
        }
        (lo, hi)
    }

    pub fn volume(&self) -> f64 {
        match self {
            Window::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Window::Polytope { .. } => {
                // Exact in dimensions 1 and 2, where the vertex hull is easy.
                let v = self.vertices();
                match self.dim() {
                    1 => {
                        let (lo, hi) = self.bounding_box();
                        hi[0] - lo[0]
                    }
                    2 => crate::geom::ConvexPolygon::hull(&v.iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>())
                        .map(|p| p.area())
                        .unwrap_or(0.0),
                    _ => f64::NAN,
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let k = self.dim();
        match self {
            Window::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite())
                {
                    return Err(Error::InvalidParameter("window box needs lo < hi".into()));
                }
            }
            Window::Polytope { normals, offsets } => {
                if k == 0 || normals.len() != offsets.len() || normals.iter().any(|a| a.len() != k) {
                    return Err(Error::InvalidParameter("malformed polytope window".into()));
                }
                // Bounded iff the recession cone {u : a·u ≤ 0} is trivial.
                let mut cn = normals.clone();
                let mut co = vec![0.0; normals.len()];
                for j in 0..k {
                    let mut e = vec![0.0; k];
                    e[j] = 1.0;
                    cn.push(e.clone());
                    co.push(1.0);
                    e[j] = -1.0;
                    cn.push(e);
                    co.push(1.0);
                }
                if polytope_vertices(&cn, &co).iter().any(|v| linalg::norm(v) > 1e-9) {
                    return Err(Error::InvalidParameter("polytope window is unbounded".into()));
                }
                let v = self.vertices();
                if v.is_empty() {
                    return Err(Error::InvalidParameter("polytope window is empty".into()));
                }
                let c: Vec<f64> = (0..k).map(|j| v.iter().map(|p| p[j]).sum::<f64>() / v.len() as f64).collect();
                if normals.iter().zip(offsets).any(|(a, b)| linalg::dot(a, &c) > b - 1e-9) {
                    return Err(Error::InvalidParameter("polytope window has empty interior".into()));
                }
            }
        }
        Ok(())
    }
}

fn polytope_vertices(normals: &[Vec<f64>], offsets: &[f64]) -> Vec<Vec<f64>> {
    let m = normals.len();
    let k = normals.first().map_or(0, Vec::len);
    let mut out: Vec<Vec<f64>> = Vec::new();
    if k == 0 || m < k {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let a: Vec<f64> = idx.iter().flat_map(|&i| normals[i].iter().copied()).collect();
        if linalg::det(&a, k).abs() > 1e-12 {
            if let Ok(inv) = linalg::inverse(&a, k) {
                let b: Vec<f64> = idx.iter().map(|&i| offsets[i]).collect();
                let v = linalg::mat_vec(&inv, k, &b);
                let feasible = normals.iter().zip(offsets).all(|(n, o)| linalg::dot(n, &v) <= o + 1e-9);
                if feasible && !out.iter().any(|u| u.iter().zip(&v).all(|(x, y)| (x - y).abs() < 1e-9)) {
                    out.push(v);
                }
            }
        }
        // Next k-subset in lexicographic order.
        let mut j = k;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            if idx[j] < m - k + j {
                idx[j] += 1;
                for l in j + 1..k {
                    idx[l] = idx[l - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `Λ(L, W)` with `L = basis·ℤⁿ + translation`; the first `d` coordinates are
/// physical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSetSpec {
    pub n: usize,
    pub d: usize,
    /// Row-major `n×n`; columns are the lattice basis.
    pub basis: Vec<f64>,
    pub translation: Vec<f64>,
    pub window: Window,
}

impl ModelSetSpec {
    pub fn new(n: usize, d: usize, basis: Vec<f64>, translation: Vec<f64>, window: Window) -> Result<Self> {
        let s = ModelSetSpec { n, d, basis, translation, window };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > self.n || self.n > 12 {
            return Err(Error::InvalidParameter("need 1 ≤ d ≤ n ≤ 12".into()));
        }
        if self.basis.len() != self.n * self.n || self.translation.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n * self.n, got: self.basis.len() });
        }
        if self.basis.iter().chain(&self.translation).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite basis or translation".into()));
        }
        if linalg::det(&self.basis, self.n).abs() < 1e-12 {
            return Err(Error::Degenerate("lattice basis is singular".into()));
        }
        let k = self.n - self.d;
        if k > 0 && self.window.dim() != k {
            return Err(Error::DimensionMismatch { expected: k, got: self.window.dim() });
        }
        if k > 0 {
            self.window.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: ModelSetSpec = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn internal_dim(&self) -> usize {
        self.n - self.d
    }

    /// Expected points per unit physical volume: `vol(W)/|det basis|`.
    pub fn density(&self) -> f64 {
        let w = if self.internal_dim() == 0 { 1.0 } else { self.window.volume() };
        w / linalg::det(&self.basis, self.n).abs()
    }

    /// `ℤ^d + translation`, with no internal space.
    pub fn lattice(d: usize, translation: Vec<f64>) -> Result<Self> {
        ModelSetSpec::new(d, d, linalg::identity(d), translation, Window::Box { lo: vec![], hi: vec![] })
    }

    /// Planar set from `ℤ³`: `x = z₁ + z₃/φ`, `y = z₂ + z₃/√φ`, internal
    /// `w = z₃ − z₁/φ − z₂/√φ ∈ [0, 1]`. The rows are orthogonal and
    /// `{1, 1/φ, 1/√φ}` is rationally independent, so `π_phys(ℤ³)` is dense.
    pub fn golden() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let (a, b) = (1.0 / phi, 1.0 / phi.sqrt());
        ModelSetSpec::new(
            3,
            2,
            vec![1.0, 0.0, a, 0.0, 1.0, b, -a, -b, 1.0],
            vec![0.0; 3],
            Window::Box { lo: vec![0.0], hi: vec![1.0] },
        )
        .expect("golden spec is valid")
    }

    /// Planar Fibonacci-type set on a line: `n = 2`, `d = 1`.
    pub fn fibonacci() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let s = 1.0 / (1.0 + phi * phi).sqrt();
        ModelSetSpec::new(
            2,
            1,
            vec![s, s * phi, -s * phi, s],
            vec![0.0; 2],
            // Offset so no lattice point projects onto the window boundary.
            Window::Box { lo: vec![-0.5 * s], hi: vec![s * (0.5 + phi)] },
        )
        .expect("fibonacci spec is valid")
    }
}

/// LLL reduction of the columns of `b` (`δ = 0.99`); returns the reduced
/// columns and the unimodular change of basis, column by column.
fn lll(mut b: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<i64>>) {
    let n = b.len();
    let mut u: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
    let gso = |b: &[Vec<f64>]| {
        let n = b.len();
        let mut bs: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut mu = vec![vec![0.0; n]; n];
        let mut nb = vec![0.0; n];
        for i in 0..n {
            let mut v = b[i].clone();
            for j in 0..i {
                mu[i][j] = linalg::dot(&b[i], &bs[j]) / nb[j];
                for (x, y) in v.iter_mut().zip(&bs[j]) {
                    *x -= mu[i][j] * y;
                }
            }
            nb[i] = linalg::dot(&v, &v);
            bs.push(v);
        }
        (mu, nb)
    };
    let (mut mu, mut nb) = gso(&b);
    let mut k = 1;
    let mut guard = 0;
    while k < n && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                let bj = b[j].clone();
                for (x, y) in b[k].iter_mut().zip(&bj) {
                    *x -= q * y;
                }
                let uj = u[j].clone();
                for (x, y) in u[k].iter_mut().zip(&uj) {
                    *x -= q as i64 * y;
                }
                (mu, nb) = gso(&b);
            }
        }
        if nb[k] >= (0.99 - mu[k][k - 1] * mu[k][k - 1]) * nb[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            u.swap(k, k - 1);
            (mu, nb) = gso(&b);
            k = (k - 1).max(1);
        }
    }
    (b, u)
}

/// Integer vectors `z` with `|M·z − y₀| ≤ radius`, in lexicographic order.
fn lattice_points_in_ball(m: &[f64], n: usize, y0: &[f64], radius: f64) -> Result<Vec<Vec<i64>>> {
    let det = linalg::det(m, n).abs();
    let estimate = unit_ball_volume(n) * radius.powi(n as i32) / det;
    if !(estimate <= MAX_CANDIDATES) {
        return Err(Error::GuardExceeded(format!("about {estimate:.3e} lattice candidates")));
    }
    let cols: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| m[i * n + j]).collect()).collect();
    let (red, u) = lll(cols);
    // Gram–Schmidt data of the reduced basis.
    let mut bs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut mu = vec![vec![0.0; n]; n];
    let mut nb = vec![0.0; n];
    for i in 0..n {
        let mut v = red[i].clone();
        for j in 0..i {
            mu[i][j] = linalg::dot(&red[i], &bs[j]) / nb[j];
            for (x, y) in v.iter_mut().zip(&bs[j]) {
                *x -= mu[i][j] * y;
            }
        }
        nb[i] = linalg::dot(&v, &v);
        bs.push(v);
    }
    let t: Vec<f64> = (0..n).map(|i| linalg::dot(y0, &bs[i]) / nb[i]).collect();
    let r2 = radius * radius * (1.0 + 1e-9) + 1e-12;

    struct Ctx<'a> {
        n: usize,
        mu: &'a [Vec<f64>],
        nb: &'a [f64],
        t: &'a [f64],
        r2: f64,
    }
    fn range(ctx: &Ctx, i: usize, z: &[i64], used: f64) -> Option<(i64, i64, f64)> {
        let c = ctx.t[i] - (i + 1..ctx.n).map(|j| ctx.mu[j][i] * z[j] as f64).sum::<f64>();
        let rem = ctx.r2 - used;
        if rem < 0.0 {
            return None;
        }
        let w = (rem / ctx.nb[i]).sqrt();
        Some(((c - w).ceil() as i64, (c + w).floor() as i64, c))
    }
    fn rec(ctx: &Ctx, i: usize, z: &mut Vec<i64>, used: f64, out: &mut Vec<Vec<i64>>) {
        let Some((lo, hi, c)) = range(ctx, i, z, used) else { return };
        for v in lo..=hi {
            z[i] = v;
            let e = used + ctx.nb[i] * (v as f64 - c).powi(2);
            if e > ctx.r2 {
                continue;
            }
            if i == 0 {
                out.push(z.clone());
            } else {
                rec(ctx, i - 1, z, e, out);
            }
        }
        z[i] = 0;
    }
    let ctx = Ctx { n, mu: &mu, nb: &nb, t: &t, r2 };
    let top = n - 1;
    let Some((lo, hi, c)) = range(&ctx, top, &vec![0; n], 0.0) else { return Ok(Vec::new()) };
    // Shard by the leading coordinate; merged in shard order.
    let shards: Vec<Vec<Vec<i64>>> = (lo..=hi)
        .into_par_iter()
        .map(|v| {
            let mut z = vec![0i64; n];
            z[top] = v;
            let e = nb[top] * (v as f64 - c).powi(2);
            let mut out = Vec::new();
            if e <= r2 {
                if top == 0 {
                    out.push(z.clone());
                } else {
                    rec(&ctx, top - 1, &mut z, e, &mut out);
                }
            }
            out
        })
        .collect();
    let mut zs: Vec<Vec<i64>> = shards
        .into_iter()
        .flatten()
        .map(|zr| (0..n).map(|i| (0..n).map(|j| u[j][i] * zr[j]).sum()).collect())
        .collect();
    zs.sort();
    Ok(zs)
}

/// Physical region `{p : |F·(p − c)| ≤ r}`.
struct Ellipsoid {
    f: Vec<f64>,
    center: Vec<f64>,
    radius: f64,
}

/// Lattice points of the spec whose physical part lies in `region` and
/// internal part in the window's bounding box, as `(z, x)`.
fn enumerate(spec: &ModelSetSpec, region: &Ellipsoid) -> Result<Vec<(Vec<i64>, Vec<f64>)>> {
    let (n, d) = (spec.n, spec.d);
    let k = n - d;
    let (wlo, whi) = if k > 0 { spec.window.bounding_box() } else { (vec![], vec![]) };
    // S maps the product region into the ball of radius √(1 + k).
    let mut s = vec![0.0; n * n];
    let mut shift = vec![0.0; n];
    for i in 0..d {
        for j in 0..d {
            s[i * n + j] = region.f[i * d + j] / region.radius;
        }
        shift[i] = region.center[i];
    }
    for j in 0..k {
        let half = 0.5 * (whi[j] - wlo[j]);
        s[(d + j) * n + d + j] = 1.0 / half;
        shift[d + j] = 0.5 * (whi[j] + wlo[j]);
    }
    let m = linalg::mat_mul(&s, &spec.basis, n);
    let off: Vec<f64> = spec.translation.iter().zip(&shift).map(|(t, c)| t - c).collect();
    let y0: Vec<f64> = linalg::mat_vec(&s, n, &off).iter().map(|x| -x).collect();
    let zs = lattice_points_in_ball(&m, n, &y0, ((1 + k) as f64).sqrt())?;
    Ok(zs
        .into_iter()
        .map(|z| {
            let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
            let x: Vec<f64> =
                linalg::mat_vec(&spec.basis, n, &zf).iter().zip(&spec.translation).map(|(a, b)| a + b).collect();
            (z, x)
        })
        .filter(|(_, x)| k == 0 || spec.window.contains(&x[d..]))
        .collect())
}

fn check_expected(spec: &ModelSetSpec, area: f64) -> Result<()> {
    let expected = spec.density() * area;
    if expected.is_nan() || expected > 1e7 {
        return Err(Error::GuardExceeded(format!("about {expected:.3e} points expected")));
    }
    Ok(())
}

/// All points of `Λ` with `‖p‖ ≤ R`, in lexicographic order of lattice
/// coordinates.
pub fn generate_model_set(spec: &ModelSetSpec, radius: f64) -> Result<PointSet> {
    spec.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let d = spec.d;
    check_expected(spec, unit_ball_volume(d) * radius.powi(d as i32))?;
    let ball = Ball::new(vec![0.0; d], radius)?;
    let region = Ellipsoid { f: linalg::identity(d), center: vec![0.0; d], radius: radius + TOL };
    let pts: Vec<f64> = enumerate(spec, &region)?
        .into_iter()
        .filter(|(_, x)| ball.contains_unchecked(&x[..d]))
        .flat_map(|(_, x)| x[..d].to_vec())
        .collect();
    Ok(PointSet::new(d, pts)?.with_meta("generator", "cutproject"))
}

/// Points of `h·Λ` inside `region`, enumerated over the preimage ellipsoid.
pub fn transformed_generate(spec: &ModelSetSpec, h: &AffineMap, region: &Ball) -> Result<PointSet> {
    spec.validate()?;
    let d = spec.d;
    if h.dim() != d || region.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: h.dim() });
    }
    if (h.det() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("h must have determinant 1".into()));
    }
    check_expected(spec, unit_ball_volume(d) * region.radius.powi(d as i32))?;
    let pts: Vec<f64> = transformed_points(spec, h, region)?.into_iter().flatten().collect();
    Ok(PointSet::new(d, pts)?.with_meta("generator", "cutproject"))
}

fn transformed_points(spec: &ModelSetSpec, h: &AffineMap, region: &Ball) -> Result<Vec<Vec<f64>>> {
    let d = spec.d;
    let inv = h.inverse()?;
    let center = inv.apply(&region.center)?;
    let ell = Ellipsoid { f: h.linear.clone(), center, radius: region.radius + TOL };
    Ok(enumerate(spec, &ell)?
        .into_iter()
        .map(|(_, x)| h.apply_unchecked(&x[..d]))
        .filter(|q| region.contains_unchecked(q))
        .collect())
}

/// Distance from the origin to `h·Λ`, found by doubling the search radius.
pub fn empty_ball_radius(spec: &ModelSetSpec, h: &AffineMap) -> Result<f64> {
    let d = spec.d;
    let mut r = (1.0 / spec.density()).powf(1.0 / d as f64).max(1e-3);
    for _ in 0..60 {
        let ball = Ball::new(vec![0.0; d], r)?;
        let pts = transformed_points(spec, h, &ball)?;
        if let Some(m) = pts.iter().map(|q| linalg::norm(q)).min_by(f64::total_cmp) {
            return Ok(if m <= TOL { 0.0 } else { m });
        }
        r *= 2.0;
    }
    Err(Error::Degenerate("no point found near the origin".into()))
}

/// Negation witness: `h·Λ ∩ B(0, T) = ∅` when `empty`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineCertificate {
    pub h: AffineMap,
    #[serde(rename = "T")]
    pub t: f64,
    /// Points of `h·Λ` counted in the closed ball on re-verification.
    pub points_checked: usize,
    pub empty: bool,
    /// Distance from the origin to the nearest point of `h·Λ`, capped at `T`.
    pub best_radius: f64,
    pub evaluations: u64,
    /// Search parameters `(θ, s, a, c₁, c₂)`.
    pub params: [f64; 5],
}

/// Search budget and seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub budget: u64,
    pub restarts: usize,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(budget: u64, seed: u64) -> Self {
        SearchConfig { budget, restarts: 20, seed }
    }
}

/// `h(p) = K(θ)·A(s)·N(a)·(p − c)`, with `s` clamped to `[−6, 6]`.
pub fn affine_from_params(x: &[f64; 5]) -> AffineMap {
    let (sn, cs) = x[0].sin_cos();
    let s = x[1].clamp(-6.0, 6.0);
    let (e, a) = (s.exp(), x[2]);
    // K·A·N = [[c, −s],[s, c]]·[[e, e·a],[0, 1/e]]
    let m = [cs * e, cs * e * a - sn / e, sn * e, sn * e * a + cs / e];
    let t = [-(m[0] * x[3] + m[1] * x[4]), -(m[2] * x[3] + m[3] * x[4])];
    AffineMap { linear: m.to_vec(), translation: t.to_vec() }
}

/// Nearest-point distance of `h·Λ` over all specs, capped at `T`.
fn capped_radius(specs: &[ModelSetSpec], h: &AffineMap, t: f64) -> f64 {
    let ball = Ball { center: vec![0.0, 0.0], radius: t };
    let mut best = t;
    for spec in specs {
        match transformed_points(spec, h, &ball) {
            Ok(pts) => {
                for q in pts {
                    best = best.min(linalg::norm(&q));
                }
            }
            Err(_) => return 0.0,
        }
    }
    best
}

/// Starting points from dual vectors `m` with `|⟨m_int, W⟩| < 1`: the set
/// lies in parallel strips `⟨m_phys, p⟩ ∈ ℤ + const − ⟨m_int, W⟩`, and
/// stretching across a gap empties a ball of half its stretched width.
fn dual_seeds(spec: &ModelSetSpec, t: f64) -> Vec<[f64; 5]> {
    let (n, d) = (spec.n, spec.d);
    if d != 2 {
        return Vec::new();
    }
    let Ok(binv) = linalg::inverse(&spec.basis, n) else { return Vec::new() };
    let verts = if n > d { spec.window.vertices() } else { vec![vec![]] };
    let r = match n {
        0..=3 => 3i64,
        4 => 2,
        _ => 1,
    };
    let mut cands: Vec<(f64, Vec<i64>, [f64; 5])> = Vec::new();
    let mut z = vec![-r; n];
    'outer: loop {
        if z.iter().any(|&v| v != 0) {
            let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
            // m = B^{-T} z.
            let m = linalg::mat_t_vec(&binv, n, &zf);
            let mp = &m[..d];
            let mw = &m[d..];
            let vals: Vec<f64> = verts.iter().map(|w| linalg::dot(mw, w)).collect();
            let (imin, imax) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let width = imax - imin;
            let np = linalg::norm(mp);
            if width < 1.0 - 1e-9 && np > 1e-12 {
                let gap = (1.0 - width) / np;
                let tau = linalg::dot(&m, &spec.translation);
                let mut v = tau - imin + 0.5 * (1.0 - width);
                v -= v.round();
                let c = [v * mp[0] / (np * np), v * mp[1] / (np * np)];
                let lambda = 2.2 * t / gap;
                let alpha = mp[1].atan2(mp[0]);
                // A* = diag(λ, 1/λ)·R(−α), split as K·(upper triangular).
                let (sa, ca) = alpha.sin_cos();
                let a = [lambda * ca, lambda * sa, -sa / lambda, ca / lambda];
                let r11 = (a[0] * a[0] + a[2] * a[2]).sqrt();
                let theta = a[2].atan2(a[0]);
                let r12 = (a[0] * a[1] + a[2] * a[3]) / r11;
                if r11.ln().abs() <= 6.0 {
                    cands.push((gap, z.clone(), [theta, r11.ln(), r12 / r11, c[0], c[1]]));
                }
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                break 'outer;
            }
            if z[i] < r {
                z[i] += 1;
                break;
            }
            z[i] = -r;
            i += 1;
        }
    }
    cands.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    cands.into_iter().map(|c| c.2).step_by(2).take(10).collect()
}

/// Simulated annealing over `(θ, s, a, c)` to maximize the empty radius,
/// then coordinate-descent polish; restarts run independently and the
/// first success by restart index wins.
pub fn search_empty_affine(spec: &ModelSetSpec, t: f64, config: &SearchConfig) -> Result<AffineCertificate> {
    search_empty_affine_union(std::slice::from_ref(spec), t, config)
}

/// As [`search_empty_affine`], against the union of several sets.
pub fn search_empty_affine_union(specs: &[ModelSetSpec], t: f64, config: &SearchConfig) -> Result<AffineCertificate> {
    if specs.is_empty() || specs.iter().any(|s| s.d != 2) {
        return Err(Error::InvalidParameter("affine search needs planar specs".into()));
    }
    for s in specs {
        s.validate()?;
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter("T must be positive".into()));
    }
    let restarts = config.restarts.max(1);
    let per = (config.budget / restarts as u64).max(1);
    let seeds = dual_seeds(&specs[0], t);
    let runs: Vec<(f64, [f64; 5], u64)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(config.seed, "anneal", r as u64);
            let x0 = seeds.get(r).copied().unwrap_or_else(|| {
                [
                    rng.random_range(0.0..std::f64::consts::PI),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ]
            });
            anneal(specs, t, x0, per, &mut rng)
        })
        .collect();
    let evaluations: u64 = runs.iter().map(|r| r.2).sum();
    let pick = runs
        .iter()
        .position(|r| r.0 >= t)
        .unwrap_or_else(|| (0..runs.len()).max_by(|&a, &b| runs[a].0.total_cmp(&runs[b].0).then(b.cmp(&a))).unwrap());
    let (best, x, _) = runs[pick];
    let h = affine_from_params(&x);
    let (empty, points_checked) = if best >= t {
        let c = verify_certificate_map(specs, &h, t)?;
        (c == 0, c)
    } else {
        (false, 0)
    };
    Ok(AffineCertificate { h, t, points_checked, empty, best_radius: best, evaluations, params: x })
}

fn anneal(specs: &[ModelSetSpec], t: f64, x0: [f64; 5], budget: u64, rng: &mut impl Rng) -> (f64, [f64; 5], u64) {
    let mut evals = 0u64;
    let f = |x: &[f64; 5], evals: &mut u64| {
        *evals += 1;
        capped_radius(specs, &affine_from_params(x), t)
    };
    let mut x = x0;
    let mut fx = f(&x, &mut evals);
    let (mut best, mut bx) = (fx, x);
    let scales = [0.05, 0.3, 0.2, 0.3, 0.3];
    let anneal_budget = budget * 4 / 5;
    while evals < anneal_budget && best < t {
        let frac = evals as f64 / anneal_budget.max(1) as f64;
        let temp = 0.3 * t * (1.0 - frac).powi(2) + 1e-6;
        let step = 1.0 - 0.9 * frac;
        let mut y = x;
        for k in 0..5 {
            y[k] += step * scales[k] * gaussian(rng);
        }
        y[1] = y[1].clamp(-6.0, 6.0);
        let fy = f(&y, &mut evals);
        if fy >= fx || rng.random::<f64>() < ((fy - fx) / temp).exp() {
            x = y;
            fx = fy;
        }
        if fx > best {
            best = fx;
            bx = x;
        }
    }
    // Coordinate descent from the best point.
    let mut steps = scales.map(|s| 0.5 * s);
    while evals < budget && best < t && steps.iter().any(|&s| s > 1e-7) {
        let mut improved = false;
        for k in 0..5 {
            for sign in [1.0, -1.0] {
                if evals >= budget || best >= t {
                    break;
                }
                let mut y = bx;
                y[k] += sign * steps[k];
                let fy = f(&y, &mut evals);
                if fy > best {
                    best = fy;
                    bx = y;
                    improved = true;
                }
            }
        }
        if !improved {
            steps = steps.map(|s| 0.5 * s);
        }
    }
    (best, bx, evals)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Fresh re-verification: enumerates `Λ` over a ball covering `h⁻¹(B(0,T))`,
/// maps forward, and counts points in the closed ball.
fn verify_certificate_map(specs: &[ModelSetSpec], h: &AffineMap, t: f64) -> Result<usize> {
    let inv = h.inverse()?;
    let c = inv.apply(&[0.0, 0.0])?;
    let reach = linalg::norm(&c) + t * linalg::spectral_norm(&inv.linear, 2) + 1.0;
    let ball = Ball::new(vec![0.0, 0.0], t)?;
    let mut count = 0;
    for spec in specs {
        let y = generate_model_set(spec, reach)?;
        count += y.iter().filter(|p| ball.contains_unchecked(&h.apply_unchecked(p))).count();
    }
    Ok(count)
}

/// Recounts `h·Λ ∩ B(0,T)` from scratch; `Ok(0)` confirms an empty witness.
pub fn verify_certificate(spec: &ModelSetSpec, cert: &AffineCertificate) -> Result<usize> {
    verify_certificate_map(std::slice::from_ref(spec), &cert.h, cert.t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifted_z2() -> ModelSetSpec {
        ModelSetSpec::lattice(2, vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn integer_line_from_trivial_window() {
        let spec =
            ModelSetSpec::new(2, 1, linalg::identity(2), vec![0.0; 2], Window::Box { lo: vec![-0.5], hi: vec![0.5] })
                .unwrap();
        let y = generate_model_set(&spec, 10.0).unwrap();
        let xs: Vec<f64> = y.iter().map(|p| p[0]).collect();
        assert_eq!(xs, (-10..=10).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn fibonacci_gaps_take_two_values() {
        let y = generate_model_set(&ModelSetSpec::fibonacci(), 200.0).unwrap();
        let mut xs: Vec<f64> = y.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        let mut gaps: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        gaps.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert_eq!(gaps.len(), 2);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((gaps[1] / gaps[0] - phi).abs() < 1e-9);
    }

    #[test]
    fn brute_force_agrees_with_enumeration() {
        let spec = ModelSetSpec::golden();
        let y = generate_model_set(&spec, 12.0).unwrap();
        let mut brute = Vec::new();
        for a in -20i64..=20 {
            for b in -20i64..=20 {
                for c in -20i64..=20 {
                    let z = [a as f64, b as f64, c as f64];
                    let x = linalg::mat_vec(&spec.basis, 3, &z);
                    if spec.window.contains(&x[2..]) && (x[0] * x[0] + x[1] * x[1]).sqrt() <= 12.0 + TOL {
                        brute.push((a, b, c));
                    }
                }
            }
        }
        assert_eq!(y.len(), brute.len());
    }

    #[test]
    fn density_matches_window_over_covolume() {
        let spec = ModelSetSpec::golden();
        assert!((spec.density() - 0.5).abs() < 1e-12);
        for r in [50.0, 100.0, 200.0] {
            let n = generate_model_set(&spec, r).unwrap().len() as f64;
            let rel = n / (std::f64::consts::PI * r * r) / spec.density();
            assert!((rel - 1.0).abs() < 0.05, "R = {r}: ratio {rel}");
        }
    }

    #[test]
    fn empty_radius_examples() {
        let id = AffineMap::identity(2);
        assert_eq!(empty_ball_radius(&ModelSetSpec::lattice(2, vec![0.0, 0.0]).unwrap(), &id).unwrap(), 0.0);
        let r = empty_ball_radius(&shifted_z2(), &id).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn transformed_paths_agree() {
        let spec = ModelSetSpec::golden();
        let region = Ball::new(vec![0.0, 0.0], 6.0).unwrap();
        let id = transformed_generate(&spec, &AffineMap::identity(2), &region).unwrap();
        assert_eq!(id, generate_model_set(&spec, 6.0).unwrap());
        let rot = affine_from_params(&[0.7, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(transformed_generate(&spec, &rot, &region).unwrap().len(), id.len());
        let mut rng = substream(5, "test", 0);
        for _ in 0..100 {
            let x = [
                rng.random_range(0.0..3.0),
                rng.random_range(-2.5..2.5),
                rng.random_range(-2.0..2.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ];
            let h = affine_from_params(&x);
            let fast = transformed_generate(&spec, &h, &region).unwrap();
            let inv = h.inverse().unwrap();
            let reach =
                linalg::norm(&inv.apply(&[0.0, 0.0]).unwrap()) + 6.0 * linalg::spectral_norm(&inv.linear, 2) + 1.0;
            let slow: Vec<Vec<f64>> = generate_model_set(&spec, reach)
                .unwrap()
                .iter()
                .map(|p| h.apply_unchecked(p))
                .filter(|q| region.contains_unchecked(q))
                .collect();
            assert_eq!(fast.len(), slow.len());
            for (p, q) in fast.iter().zip(&slow) {
                assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn strong_shear_counts_match() {
        let spec = ModelSetSpec::golden();
        let h = AffineMap::volume_preserving(vec![1.0, 40.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let region = Ball::new(vec![0.0, 0.0], 8.0).unwrap();
        let fast = transformed_generate(&spec, &h, &region).unwrap();
        let cert = AffineCertificate {
            h: h.clone(),
            t: 8.0,
            points_checked: 0,
            empty: false,
            best_radius: 0.0,
            evaluations: 0,
            params: [0.0; 5],
        };
        assert_eq!(verify_certificate(&spec, &cert).unwrap(), fast.len());
    }

    #[test]
    fn shifted_grid_certificate() {
        let cert = search_empty_affine(&shifted_z2(), 0.4, &SearchConfig::new(2000, 1)).unwrap();
        assert!(cert.empty);
        assert_eq!(verify_certificate(&shifted_z2(), &cert).unwrap(), 0);
    }

    #[test]
    fn golden_certificate_at_five() {
        let spec = ModelSetSpec::golden();
        let cert = search_empty_affine(&spec, 5.0, &SearchConfig::new(100_000, 3)).unwrap();
        assert!(cert.empty, "best radius {}", cert.best_radius);
        assert!(cert.evaluations <= 100_000);
        assert_eq!(verify_certificate(&spec, &cert).unwrap(), 0);
        assert!(empty_ball_radius(&spec, &cert.h).unwrap() >= 5.0);
    }

    #[test]
    fn tiny_budget_is_best_effort() {
        let spec = ModelSetSpec::golden();
        let cert = search_empty_affine(&spec, 1e6, &SearchConfig { budget: 40, restarts: 2, seed: 0 }).unwrap();
        assert!(!cert.empty);
        assert!(cert.best_radius < 1e6);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let w = Window::Box { lo: vec![0.0], hi: vec![1.0] };
        assert!(ModelSetSpec::new(2, 1, vec![1.0, 2.0, 2.0, 4.0], vec![0.0; 2], w.clone()).is_err());
        let open = Window::Polytope { normals: vec![vec![1.0]], offsets: vec![1.0] };
        assert!(ModelSetSpec::new(2, 1, linalg::identity(2), vec![0.0; 2], open).is_err());
        let seg = Window::Polytope { normals: vec![vec![1.0], vec![-1.0]], offsets: vec![0.5, 0.5] };
        let s = ModelSetSpec::new(2, 1, linalg::identity(2), vec![0.0; 2], seg).unwrap();
        assert_eq!(generate_model_set(&s, 3.0).unwrap().len(), 7);
        assert!(ModelSetSpec::from_json("{\"n\": 2}").is_err());
        let text = serde_json::to_string(&ModelSetSpec::golden()).unwrap();
        assert_eq!(ModelSetSpec::from_json(&text).unwrap(), ModelSetSpec::golden());
        assert!(text.contains("\"type\":\"box\""));
    }

    #[test]
    fn lll_preserves_lattice() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![57.0, 1.0, 0.0], vec![13.0, 91.0, 1.0]];
        let (red, u) = lll(cols.clone());
        for (r, uc) in red.iter().zip(&u) {
            for i in 0..3 {
                let v: f64 = (0..3).map(|j| cols[j][i] * uc[j] as f64).sum();
                assert!((v - r[i]).abs() < 1e-9);
            }
        }
        assert!(red.iter().all(|c| linalg::norm(c) < 2.0));
    }
}
