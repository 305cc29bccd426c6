//! ε-nets for boxes: VC-dimension bounds, the Sauer–Shelah bound, random
//! subsets of the fine grid `Γ_n`, and net verification (exact for
//! axis-parallel rectangles in the plane, adversarial for oriented boxes).

use std::ops::ControlFlow;

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{AxisBox, OrientedBox, Region, TOL};
use crate::pointset::PointSet;
use crate::rng::substream;
use crate::{Error, Result};

/// `∑_{i=0}^{min(k,n)} C(n, i)`.
pub fn sauer_shelah_bound(n: u64, k: u64) -> BigUint {
    let mut total = BigUint::from(0u32);
    let mut binom = BigUint::from(1u32);
    for i in 0..=k.min(n) {
        total += &binom;
        binom = binom * (n - i) / (i + 1);
    }
    total
}

/// Published VC-dimension bounds for ranges in `ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcBounds {
    pub d: usize,
    /// Half-spaces: exactly `d + 1`.
    pub halfspace: u64,
    /// Boxes as intersections of `2d` half-spaces: `⌊4d(d+1)·log₂(2d(d+1))⌋`.
    pub boxes_bound: u64,
    /// Working constant `t = 4(d+1)³`.
    pub t: u64,
}

pub fn vc_bounds(d: usize) -> Result<VcBounds> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let d64 = d as u64;
    let m = (2 * d * (d + 1)) as f64;
    Ok(VcBounds { d, halfspace: d64 + 1, boxes_bound: (2.0 * m * m.log2()).floor() as u64, t: 4 * (d64 + 1).pow(3) })
}

/// Bound `2·vc·k·log₂(vc·k)` on intersections of `k` ranges from a family of
/// VC-dimension `vc`.
pub fn intersection_bound(vc: u64, k: u64) -> f64 {
    let m = (vc * k) as f64;
    if m <= 1.0 {
        return m;
    }
    2.0 * m * m.log2()
}

/// The theoretical sampling constant `4(2dt + 1)`.
pub fn theoretical_constant(d: usize) -> f64 {
    let t = 4.0 * ((d + 1) as f64).powi(3);
    4.0 * (2.0 * d as f64 * t + 1.0)
}

/// A finite range space: ranges are subsets of ground-point indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSpaceSample {
    pub ground: Vec<Vec<f64>>,
    pub ranges: Vec<Vec<usize>>,
}

impl RangeSpaceSample {
    /// Validates indices and removes duplicate ranges.
    pub fn new(ground: Vec<Vec<f64>>, ranges: Vec<Vec<usize>>) -> Result<Self> {
        let n = ground.len();
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for mut r in ranges {
            if r.iter().any(|&i| i >= n) {
                return Err(Error::InvalidParameter("range index outside ground set".into()));
            }
            r.sort_unstable();
            r.dedup();
            if seen.insert(r.clone()) {
                out.push(r);
            }
        }
        Ok(RangeSpaceSample { ground, ranges: out })
    }

    /// Ranges cut out of planar `ground` by closed axis-parallel rectangles.
    pub fn axis_boxes_2d(ground: Vec<Vec<f64>>) -> Result<Self> {
        let n = ground.len();
        let mut xs: Vec<f64> = ground.iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = ground.iter().map(|p| p[1]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let mut ranges = vec![Vec::new()];
        for a in 0..n {
            for b in a..n {
                for c in 0..n {
                    for d in c..n {
                        let r: Vec<usize> = (0..n)
                            .filter(|&i| {
                                let p = &ground[i];
                                p[0] >= xs[a] && p[0] <= xs[b] && p[1] >= ys[c] && p[1] <= ys[d]
                            })
                            .collect();
                        ranges.push(r);
                    }
                }
            }
        }
        RangeSpaceSample::new(ground, ranges)
    }
}

/// Exact VC dimension by subset enumeration in increasing size. An empty
/// range list shatters nothing and is reported as 0.
pub fn brute_force_vc_dim(rs: &RangeSpaceSample) -> Result<usize> {
    let n = rs.ground.len();
    if n > 16 {
        return Err(Error::InvalidParameter(format!("ground set of {n} points exceeds 16")));
    }
    let masks: Vec<u32> = rs.ranges.iter().map(|r| r.iter().fold(0u32, |m, &i| m | 1 << i)).collect();
    if masks.is_empty() {
        return Ok(0);
    }
    let mut traces = vec![false; 1 << n];
    let mut best = 0;
    for size in 1..=n {
        let mut found = false;
        for f in 0u32..1 << n {
            if f.count_ones() as usize != size {
                continue;
            }
            let mut distinct = 0usize;
            let mut touched = Vec::with_capacity(masks.len());
            for &m in &masks {
                let t = (m & f) as usize;
                if !traces[t] {
                    traces[t] = true;
                    touched.push(t);
                    distinct += 1;
                }
            }
            for t in touched {
                traces[t] = false;
            }
            if distinct == 1 << size {
                found = true;
                break;
            }
        }
        if !found {
            break;
        }
        // Shattering is hereditary, so the first failing size ends the search.
        best = size;
    }
    Ok(best)
}

/// The grid `Γ_n` of mesh `1/n` centered in `Q_n` (edge `n`), with `n²+1`
/// vertices per axis. Stored implicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGamma {
    pub n: u64,
    pub dim: usize,
}

impl GridGamma {
    pub fn per_axis(&self) -> u64 {
        self.n * self.n + 1
    }

    pub fn len(&self) -> u128 {
        (self.per_axis() as u128).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of grid step `i` along one axis.
    pub fn coord(&self, i: u64) -> f64 {
        i as f64 / self.n as f64 - self.n as f64 / 2.0
    }

    /// Vertex with linear index `idx` (first axis fastest).
    pub fn vertex(&self, mut idx: u128, out: &mut Vec<f64>) {
        out.clear();
        let m = self.per_axis() as u128;
        for _ in 0..self.dim {
            out.push(self.coord((idx % m) as u64));
            idx /= m;
        }
    }

    /// Number of vertices inside a closed planar oriented box.
    pub fn count_in_box_2d(&self, b: &OrientedBox) -> u64 {
        let poly = b.to_polygon();
        let (lo, hi) = b.bounds();
        let n = self.n as f64;
        let half = n / 2.0;
        let m = self.per_axis() as i64;
        let j0 = (((lo[1] + half) * n).ceil() as i64).max(0);
        let j1 = (((hi[1] + half) * n).floor() as i64).min(m - 1);
        let mut total = 0u64;
        for j in j0..=j1 {
            let y = self.coord(j as u64);
            let v = &poly.vertices;
            let (mut xl, mut xr) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..v.len() {
                let (a, c) = (v[k], v[(k + 1) % v.len()]);
                if (a[1] - y) * (c[1] - y) <= 0.0 && a[1] != c[1] {
                    let x = a[0] + (y - a[1]) / (c[1] - a[1]) * (c[0] - a[0]);
                    xl = xl.min(x);
                    xr = xr.max(x);
                }
            }
            if xl > xr {
                continue;
            }
            let i0 = (((xl + half) * n - 1e-9).ceil() as i64).max(0);
            let i1 = (((xr + half) * n + 1e-9).floor() as i64).min(m - 1);
            if i1 >= i0 {
                total += (i1 - i0 + 1) as u64;
            }
        }
        total
    }
}

/// Sampling probability `c·ln(n)/n^d`.
pub fn sampling_probability(n: u64, d: usize, c: f64) -> f64 {
    c * (n as f64).ln() / (n as f64).powi(d as i32)
}

/// Expected net size `c·n^d·ln(n)`.
pub fn expected_net_size(n: u64, d: usize, c: f64) -> f64 {
    c * (n as f64).powi(d as i32) * (n as f64).ln()
}

/// Keeps each vertex of `Γ_n` independently with probability `p`, by skipping
/// geometrically distributed gaps.
pub fn sample_grid(gamma: GridGamma, p: f64, seed: u64, attempt: u64) -> PointSet {
    let mut coords = Vec::new();
    let total = gamma.len();
    let mut v = Vec::with_capacity(gamma.dim);
    if p <= 0.0 {
        return PointSet::empty(gamma.dim);
    }
    let mut rng = substream(seed, "net-sample", attempt);
    let log_q = (1.0 - p).ln();
    let mut idx: u128 = 0;
    loop {
        if p < 1.0 {
            let u: f64 = 1.0 - rng.random::<f64>();
            let skip = (u.ln() / log_q).floor();
            if skip >= (total - idx) as f64 {
                break;
            }
            idx += skip as u128;
        }
        if idx >= total {
            break;
        }
        gamma.vertex(idx, &mut v);
        coords.extend_from_slice(&v);
        idx += 1;
    }
    PointSet::new(gamma.dim, coords).expect("grid vertices are finite")
}

/// Parameters of the random-grid net construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub n: u64,
    pub d: usize,
    pub c: f64,
    pub seed: u64,
    pub max_attempts: u64,
    pub restarts: usize,
    pub iterations: usize,
}

impl NetParams {
    pub fn new(n: u64, d: usize, c: f64, seed: u64) -> Self {
        NetParams { n, d, c, seed, max_attempts: 20, restarts: 200, iterations: 300 }
    }
}

/// Outcome of [`build_probabilistic_net`].
#[derive(Clone, Debug)]
pub struct NetResult {
    pub net: PointSet,
    pub params: NetParams,
    pub certified: bool,
    pub attempts: u64,
    pub worst_axis_area: f64,
    pub adversarial_best_score: f64,
    /// Final adversarial boxes holding fewer than `n^d/2` grid vertices.
    pub sparse_grid_boxes: usize,
}

/// JSON certification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    pub certified: bool,
    pub attempts: u64,
    pub n: u64,
    pub d: usize,
    pub c: f64,
    pub seed: u64,
    pub worst_axis_area: f64,
    pub adversarial_best_score: f64,
    pub size: usize,
    pub sparse_grid_boxes: usize,
}

impl NetResult {
    pub fn report(&self) -> NetReport {
        NetReport {
            certified: self.certified,
            attempts: self.attempts,
            n: self.params.n,
            d: self.params.d,
            c: self.params.c,
            seed: self.params.seed,
            worst_axis_area: self.worst_axis_area,
            adversarial_best_score: self.adversarial_best_score,
            size: self.net.len(),
            sparse_grid_boxes: self.sparse_grid_boxes,
        }
    }
}

/// Result of verifying that a planar set meets every box of a given volume
/// inside a region.
#[derive(Clone, Debug)]
pub struct NetVerification {
    pub worst_axis_area: f64,
    pub worst_axis_box: AxisBox,
    pub adversarial: AdversarialResult,
}

impl NetVerification {
    /// A closed empty box has positive distance to `y`, so its area is
    /// below the open supremum: no closed empty box of area `volume` exists
    /// iff the supremum is at most `volume`.
    pub fn certified(&self, volume: f64) -> bool {
        self.worst_axis_area <= volume * (1.0 + 1e-12) && self.adversarial.empty_box.is_none()
    }
}

/// Exact axis-parallel check plus adversarial oriented-box search.
pub fn verify_net_2d(
    y: &PointSet,
    region: &AxisBox,
    volume: f64,
    search: &SearchParams,
    seed: u64,
) -> Result<NetVerification> {
    let (worst_axis_box, worst_axis_area) = max_empty_axis_rect_2d(y, region)?;
    let adversarial = adversarial_box_search(y, region, volume, search, seed)?;
    Ok(NetVerification { worst_axis_area, worst_axis_box, adversarial })
}

/// Random subset of `Γ_n` hitting every box of volume 1 in `Q_n`, certified by
/// verification and retried with fresh streams.
pub fn build_probabilistic_net(params: &NetParams) -> Result<NetResult> {
    let NetParams { n, d, c, seed, max_attempts, .. } = *params;
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter("c must be nonnegative".into()));
    }
    let p = sampling_probability(n, d, c);
    if p > 1.0 {
        return Err(Error::InvalidParameter(format!("sampling probability {p} exceeds 1")));
    }
    if d != 2 {
        return Err(Error::InvalidParameter("net verification is implemented for d = 2".into()));
    }
    let gamma = GridGamma { n, dim: d };
    let region = AxisBox::cube(d, n as f64 / 2.0)?;
    let search = SearchParams::new(params.restarts, params.iterations);
    let mut best: Option<NetResult> = None;
    for attempt in 0..max_attempts.max(1) {
        let net = sample_grid(gamma, p, seed, attempt)
            .with_meta("generator", "probabilistic-net")
            .with_meta("n", n)
            .with_meta("d", d as u64)
            .with_meta("c", c)
            .with_meta("seed", seed)
            .with_meta("attempt", attempt);
        let v = verify_net_2d(&net, &region, 1.0, &search, seed ^ attempt.rotate_left(32))?;
        let half = (n as f64).powi(d as i32) / 2.0;
        let sparse = v.adversarial.final_boxes.iter().filter(|b| (gamma.count_in_box_2d(b) as f64) < half).count();
        let certified = v.certified(1.0);
        let result = NetResult {
            net,
            params: params.clone(),
            certified,
            attempts: attempt + 1,
            worst_axis_area: v.worst_axis_area,
            adversarial_best_score: v.adversarial.best_score,
            sparse_grid_boxes: sparse,
        };
        if certified {
            return Ok(result);
        }
        let better = best.as_ref().is_none_or(|b| result.worst_axis_area < b.worst_axis_area);
        if better {
            best = Some(result);
        }
    }
    let mut out = best.expect("at least one attempt");
    out.attempts = max_attempts.max(1);
    Ok(out)
}

/// Column buckets over points in x-rank order, each holding its members
/// sorted by y and by rank.
struct Columns {
    x0: f64,
    width: f64,
    /// Coordinates indexed by x-rank.
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Column `c` owns ranks `starts[c]..starts[c + 1]`.
    starts: Vec<usize>,
    /// Each column's `(y, rank)` pairs sorted by y.
    by_y: Vec<(f64, u32)>,
}

impl Columns {
    fn new(pts: &[[f64; 2]], x0: f64, x1: f64) -> Self {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(pts[a][1].total_cmp(&pts[b][1])));
        let xs: Vec<f64> = order.iter().map(|&i| pts[i][0]).collect();
        let ys: Vec<f64> = order.iter().map(|&i| pts[i][1]).collect();
        let k = pts.len();
        let ncol = ((k as f64).sqrt() / 4.0).ceil().max(1.0) as usize;
        let width = ((x1 - x0) / ncol as f64).max(f64::MIN_POSITIVE);
        let col_of = |x: f64| (((x - x0) / width).floor().max(0.0) as usize).min(ncol - 1);
        let mut starts = vec![0usize; ncol + 1];
        for &x in &xs {
            starts[col_of(x) + 1] += 1;
        }
        for c in 0..ncol {
            starts[c + 1] += starts[c];
        }
        let mut by_y: Vec<(f64, u32)> = ys.iter().enumerate().map(|(r, &y)| (y, r as u32)).collect();
        for c in 0..ncol {
            by_y[starts[c]..starts[c + 1]].sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Columns { x0, width, xs, ys, starts, by_y }
    }

    fn ncol(&self) -> usize {
        self.starts.len() - 1
    }

    fn col_of(&self, x: f64) -> usize {
        (((x - self.x0) / self.width).floor().max(0.0) as usize).min(self.ncol() - 1)
    }

    /// Smallest rank `> after` whose y lies in the open band `(lo, hi)`.
    fn next_in_band(&self, after: usize, lo: f64, hi: f64) -> Option<usize> {
        let start_col = if after + 1 < self.xs.len() { self.col_of(self.xs[after + 1]) } else { return None };
        for c in start_col..self.ncol() {
            let (s, e) = (self.starts[c], self.starts[c + 1]);
            if s == e || e <= after + 1 {
                continue;
            }
            let col = &self.by_y[s..e];
            let a = col.partition_point(|q| q.0 <= lo);
            let b = col.partition_point(|q| q.0 < hi);
            if a >= b {
                continue;
            }
            let m = b - a;
            let first = s.max(after + 1);
            let found = if m <= 48 || m * m <= e - first {
                col[a..b].iter().map(|q| q.1 as usize).filter(|&r| r > after).min()
            } else {
                (first..e).find(|&r| self.ys[r] > lo && self.ys[r] < hi)
            };
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

/// Largest rectangle with a point on its left edge, by rightward staircase
/// sweeps. Returns `(area, x0, x1, y0, y1)`.
fn sweep_right(cols: &Columns, region: &AxisBox, mut best: f64) -> Option<(f64, [f64; 4])> {
    let (rx1, ry0, ry1) = (region.hi[0], region.lo[1], region.hi[1]);
    let mut out = None;
    for r in 0..cols.xs.len() {
        let (px, py) = (cols.xs[r], cols.ys[r]);
        let (mut bot, mut top) = (ry0, ry1);
        let mut after = r;
        // Points sharing the left edge's x do not obstruct it.
        while after + 1 < cols.xs.len() && cols.xs[after + 1] == px {
            after += 1;
        }
        loop {
            if (top - bot) * (rx1 - px) <= best {
                break;
            }
            match cols.next_in_band(after, bot, top) {
                None => {
                    let a = (top - bot) * (rx1 - px);
                    if a > best {
                        best = a;
                        out = Some((a, [px, rx1, bot, top]));
                    }
                    break;
                }
                Some(q) => {
                    let (qx, qy) = (cols.xs[q], cols.ys[q]);
                    let a = (top - bot) * (qx - px);
                    if a > best {
                        best = a;
                        out = Some((a, [px, qx, bot, top]));
                    }
                    if qy > py {
                        top = qy;
                    } else if qy < py {
                        bot = qy;
                    } else {
                        break;
                    }
                    after = q;
                }
            }
        }
    }
    out
}

/// Maximum-area axis-parallel rectangle inside `region` whose open interior
/// contains no point of `y`. Exact.
pub fn max_empty_axis_rect_2d(y: &PointSet, region: &AxisBox) -> Result<(AxisBox, f64)> {
    if y.dim() != 2 || region.dim() != 2 {
        return Err(Error::InvalidParameter("max_empty_axis_rect_2d needs d = 2".into()));
    }
    let (lo, hi) = (&region.lo, &region.hi);
    let pts: Vec<[f64; 2]> = y
        .iter()
        .filter(|p| p[0] > lo[0] && p[0] < hi[0] && p[1] > lo[1] && p[1] < hi[1])
        .map(|p| [p[0], p[1]])
        .collect();
    if pts.len() > 50_000_000 {
        return Err(Error::GuardExceeded(format!("{} points in region", pts.len())));
    }
    // Full-width strips.
    let mut ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    ys.push(lo[1]);
    ys.push(hi[1]);
    ys.sort_by(f64::total_cmp);
    let w = hi[0] - lo[0];
    let mut best = 0.0;
    let mut rect = [lo[0], hi[0], lo[1], hi[1]];
    for g in ys.windows(2) {
        let a = w * (g[1] - g[0]);
        if a > best {
            best = a;
            rect = [lo[0], hi[0], g[0], g[1]];
        }
    }
    if !pts.is_empty() {
        let cols = Columns::new(&pts, lo[0], hi[0]);
        if let Some((a, r)) = sweep_right(&cols, region, best) {
            best = a;
            rect = r;
        }
        let mirrored: Vec<[f64; 2]> = pts.iter().map(|p| [-p[0], p[1]]).collect();
        let mregion = AxisBox { lo: vec![-hi[0], lo[1]], hi: vec![-lo[0], hi[1]] };
        let mcols = Columns::new(&mirrored, -hi[0], -lo[0]);
        if let Some((a, r)) = sweep_right(&mcols, &mregion, best) {
            best = a;
            rect = [-r[1], -r[0], r[2], r[3]];
        }
    }
    let b = AxisBox { lo: vec![rect[0], rect[2]], hi: vec![rect[1], rect[3]] };
    Ok((b, best))
}

/// Budget for [`adversarial_box_search`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub restarts: usize,
    pub iterations: usize,
    /// Stop counting a box after this many points; a restart whose simplex
    /// holds only capped boxes ends early.
    #[serde(default)]
    pub count_cap: Option<usize>,
}

impl SearchParams {
    pub fn new(restarts: usize, iterations: usize) -> Self {
        SearchParams { restarts, iterations, count_cap: None }
    }
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams::new(200, 300)
    }
}

/// Outcome of [`adversarial_box_search`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdversarialResult {
    /// First empty box found, by restart index, re-counted exactly.
    pub empty_box: Option<OrientedBox>,
    /// Best objective value: positive only for empty boxes.
    pub best_score: f64,
    pub evaluations: u64,
    /// Final box of every restart, for diagnostics.
    #[serde(skip)]
    pub final_boxes: Vec<OrientedBox>,
}

struct BoxObjective<'a> {
    y: &'a PointSet,
    region: &'a AxisBox,
    volume: f64,
    rho_max: f64,
    cap: usize,
}

impl BoxObjective<'_> {
    /// Maps raw parameters to a fitting box, or `None` with an overflow amount.
    fn decode(&self, x: &[f64; 4]) -> std::result::Result<OrientedBox, f64> {
        let rho = x[3].clamp(-self.rho_max, self.rho_max);
        let s = self.volume.sqrt();
        let (a, b) = (0.5 * s * (0.5 * rho).exp(), 0.5 * s * (-0.5 * rho).exp());
        let (sn, cs) = x[2].sin_cos();
        let wx = a * cs.abs() + b * sn.abs();
        let wy = a * sn.abs() + b * cs.abs();
        let (lo, hi) = (&self.region.lo, &self.region.hi);
        let over = (2.0 * wx - (hi[0] - lo[0])).max(0.0) + (2.0 * wy - (hi[1] - lo[1])).max(0.0);
        if over > 0.0 {
            return Err(over);
        }
        let cx = x[0].clamp(lo[0] + wx, hi[0] - wx);
        let cy = x[1].clamp(lo[1] + wy, hi[1] - wy);
        Ok(OrientedBox::from_angle([cx, cy], x[2], [a, b]).expect("positive extents"))
    }

    fn score_box(&self, b: &OrientedBox) -> f64 {
        // Clearance and depth are measured in units of the short half side.
        let unit = b.half_extents.iter().cloned().fold(f64::INFINITY, f64::min);
        let cap = self.cap;
        // Planar box coordinates, inlined: this is the hot loop of the search.
        let (f, c, h) = (&b.frame, [b.center[0], b.center[1]], [b.half_extents[0], b.half_extents[1]]);
        let excess = |p: &[f64]| {
            let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
            ((f[0] * dx + f[2] * dy).abs() - h[0], (f[1] * dx + f[3] * dy).abs() - h[1])
        };
        let mut count = 0usize;
        let mut depth = 0.0;
        let _ = self.y.try_for_each_in_region(b, |i| {
            let (u, v) = excess(self.y.point(i));
            if u <= TOL && v <= TOL {
                count += 1;
                if count >= cap {
                    return ControlFlow::Break(());
                }
                depth += (-u).min(-v);
            }
            ControlFlow::Continue(())
        });
        if count >= cap {
            return -(cap as f64);
        }
        if count > 0 {
            return -(count as f64) - depth / count as f64 / unit;
        }
        // Empty: reward distance to the nearest point in a margin of one unit.
        let probe = OrientedBox {
            center: b.center.clone(),
            frame: b.frame.clone(),
            half_extents: b.half_extents.iter().map(|h| h + unit).collect(),
        };
        let mut clearance = unit;
        let _ = self.y.try_for_each_in_region(&probe, |i| {
            let (u, v) = excess(self.y.point(i));
            if u > TOL || v > TOL {
                clearance = clearance.min((u.max(0.0).powi(2) + v.max(0.0).powi(2)).sqrt());
            }
            ControlFlow::Continue(())
        });
        (clearance / unit).tanh().max(f64::MIN_POSITIVE)
    }

    fn score(&self, x: &[f64; 4]) -> f64 {
        match self.decode(x) {
            Ok(b) => self.score_box(&b),
            Err(over) => -1e9 - over,
        }
    }
}

/// Independent emptiness check: scans the bounding box and tests every point
/// in box coordinates.
fn recount(y: &PointSet, b: &OrientedBox) -> usize {
    let (lo, hi) = b.bounds();
    let (lo, hi): (Vec<f64>, Vec<f64>) = (lo.iter().map(|v| v - 1e-6).collect(), hi.iter().map(|v| v + 1e-6).collect());
    y.iter()
        .filter(|p| p.iter().zip(lo.iter().zip(&hi)).all(|(x, (l, h))| x >= l && x <= h))
        .filter(|p| b.contains_unchecked(p))
        .count()
}

/// Nelder–Mead ascent of `f` from simplex `pts`.
fn nelder_mead(
    f: &dyn Fn(&[f64; 4]) -> f64,
    mut pts: Vec<[f64; 4]>,
    iters: usize,
    floor: f64,
    evals: &mut u64,
) -> ([f64; 4], f64) {
    let mut vals: Vec<f64> = pts
        .iter()
        .map(|p| {
            *evals += 1;
            f(p)
        })
        .collect();
    let eval = |p: &[f64; 4], evals: &mut u64| {
        *evals += 1;
        f(p)
    };
    for _ in 0..iters {
        let mut idx: Vec<usize> = (0..5).collect();
        idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        pts = idx.iter().map(|&i| pts[i]).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if vals[0] >= 0.999 || vals[0] == floor {
            break;
        }
        let mut cen = [0.0; 4];
        for p in &pts[..4] {
            for k in 0..4 {
                cen[k] += p[k] / 4.0;
            }
        }
        let along = |t: f64| {
            let mut q = [0.0; 4];
            for k in 0..4 {
                q[k] = cen[k] + t * (pts[4][k] - cen[k]);
            }
            q
        };
        let xr = along(-1.0);
        let fr = eval(&xr, evals);
        if fr > vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, evals);
            if fe > fr {
                pts[4] = xe;
                vals[4] = fe;
            } else {
                pts[4] = xr;
                vals[4] = fr;
            }
        } else if fr > vals[3] {
            pts[4] = xr;
            vals[4] = fr;
        } else {
            let xc = if fr > vals[4] { along(-0.5) } else { along(0.5) };
            let fc = eval(&xc, evals);
            if fc > vals[4].max(fr) {
                pts[4] = xc;
                vals[4] = fc;
            } else {
                for i in 1..5 {
                    for k in 0..4 {
                        pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
                    }
                    vals[i] = eval(&pts[i], evals);
                }
            }
        }
    }
    let (mut bi, mut bv) = (0, vals[0]);
    for i in 1..5 {
        if vals[i] > bv {
            bi = i;
            bv = vals[i];
        }
    }
    (pts[bi], bv)
}

/// Multi-start search for an oriented box of volume `target_volume` inside
/// `region` that contains no point of `y`. Deterministic given `seed`.
pub fn adversarial_box_search(
    y: &PointSet,
    region: &AxisBox,
    target_volume: f64,
    search: &SearchParams,
    seed: u64,
) -> Result<AdversarialResult> {
    if y.dim() != 2 || region.dim() != 2 {
        return Err(Error::InvalidParameter("adversarial search needs d = 2".into()));
    }
    if !(target_volume > 0.0) {
        return Err(Error::InvalidParameter("target volume must be positive".into()));
    }
    let side = (region.side(0)).min(region.side(1));
    let obj = BoxObjective {
        y,
        region,
        volume: target_volume,
        rho_max: (side * side / target_volume).max(1.0).ln(),
        cap: search.count_cap.unwrap_or(usize::MAX).max(1),
    };
    let runs: Vec<(f64, Option<OrientedBox>, OrientedBox, u64)> = (0..search.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, "adversarial", r as u64);
            let start = [
                rng.random_range(region.lo[0]..region.hi[0]),
                rng.random_range(region.lo[1]..region.hi[1]),
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(-obj.rho_max..=obj.rho_max),
            ];
            let scale = target_volume.sqrt();
            let steps = [0.5 * scale, 0.5 * scale, 0.3, 0.5];
            let mut simplex = vec![start];
            for k in 0..4 {
                let mut p = start;
                p[k] += steps[k];
                simplex.push(p);
            }
            let mut evals = 0u64;
            let f = |x: &[f64; 4]| obj.score(x);
            let (x, v) = nelder_mead(&f, simplex, search.iterations, -(obj.cap as f64), &mut evals);
            let b = obj.decode(&x).unwrap_or_else(|_| {
                OrientedBox::from_angle(
                    [0.5 * (region.lo[0] + region.hi[0]), 0.5 * (region.lo[1] + region.hi[1])],
                    0.0,
                    [0.5 * scale, 0.5 * scale],
                )
                .expect("positive extents")
            });
            let empty = (v > 0.0 && recount(y, &b) == 0).then(|| b.clone());
            (v, empty, b, evals)
        })
        .collect();
    let mut best_score = f64::NEG_INFINITY;
    let mut empty_box = None;
    let mut evaluations = 0;
    for (v, e, _, n) in &runs {
        best_score = best_score.max(*v);
        evaluations += n;
        if e.is_some() {
            empty_box = e.clone();
            break;
        }
    }
    Ok(AdversarialResult { empty_box, best_score, evaluations, final_boxes: runs.into_iter().map(|r| r.2).collect() })
}

/// Contracts `Y ∩ [−e/2, e/2]^d`, `e = ε^{−1/d}`, by `ε^{1/d}` into the unit cube.
pub fn extract_net_from_danzer(y: &PointSet, epsilon: f64) -> Result<PointSet> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter("epsilon must lie in (0, 1]".into()));
    }
    let d = y.dim();
    let s = epsilon.powf(1.0 / d as f64);
    let cube = AxisBox::cube(d, 0.5 / s)?;
    y.restrict(&cube)?.rescale(s)
}
