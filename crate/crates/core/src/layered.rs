//! Exponential cubical layers, the box-in-cube and layer-witness lemmas, and
//! the layer-by-layer assembly of a Danzer set from box nets.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{box_sandwich_2d, AxisBox, ConvexPolygon, OrientedBox, Volume};
use crate::linalg;
use crate::nets::{
    adversarial_box_search, build_probabilistic_net, expected_net_size, sampling_probability, NetParams, NetResult,
    SearchParams,
};
use crate::pointset::PointSet;
use crate::rng::{derive_seed, substream};
use crate::{Error, Result};

/// `C_d = 1/(4d·log₂(10d))`.
pub fn c_d(d: usize) -> f64 {
    1.0 / (4.0 * d as f64 * (10.0 * d as f64).log2())
}

/// `α_d = (3d)^d`, exact.
pub fn alpha_d(d: usize) -> u128 {
    (3 * d as u128).pow(d as u32)
}

/// `(C_d, α_d)` for `d ≥ 2`.
pub fn constants(d: usize) -> Result<(f64, f64)> {
    if d < 2 {
        return Err(Error::InvalidParameter("constants need d >= 2".into()));
    }
    Ok((c_d(d), alpha_d(d) as f64))
}

/// Smallest `j` with `5d ≤ 2^j`.
pub fn j_d(d: usize) -> u32 {
    let mut j = 0;
    while (1usize << j) < 5 * d {
        j += 1;
    }
    j
}

fn pow2(i: i32) -> f64 {
    2f64.powi(i)
}

/// Layer of `x`: `L_1 = Q_2`, `L_i = Q_{2^i} \ Q_{2^{i−1}}`.
pub fn layer_index(x: &[f64]) -> u32 {
    let s = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s <= 2.0 {
        return 1;
    }
    let mut i = s.log2().ceil() as i32;
    while pow2(i) < s {
        i += 1;
    }
    while pow2(i - 1) >= s {
        i -= 1;
    }
    i as u32
}

/// The partition of `Q_{2^m}` into layers `L_1..L_m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPartition {
    pub dim: usize,
    pub max_layer: u32,
}

impl LayerPartition {
    pub fn contains(&self, i: u32, x: &[f64]) -> bool {
        i >= 1 && i <= self.max_layer && layer_index(x) == i
    }

    /// Volume of `L_i`.
    pub fn volume(&self, i: u32) -> f64 {
        let outer = pow2(i as i32 + 1).powi(self.dim as i32);
        if i == 1 {
            outer
        } else {
            outer - pow2(i as i32).powi(self.dim as i32)
        }
    }

    /// The outer cube `Q_{2^i}`.
    pub fn outer_cube(&self, i: u32) -> AxisBox {
        AxisBox::cube(self.dim, pow2(i as i32)).expect("positive side")
    }
}

/// Outcome of [`check_box_in_cube`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxInCube {
    /// Monte-Carlo estimate of `Vol(Q_t ∩ R)/Vol(R)`.
    pub fraction: f64,
    pub std_error: f64,
    pub hypothesis: bool,
    /// Exact vertex check of `R ⊆ Q_{5td}`.
    pub conclusion: bool,
}

/// Evaluates the half-volume hypothesis by sampling and the containment
/// `R ⊆ Q_{5td}` exactly.
pub fn check_box_in_cube(r: &OrientedBox, t: f64, samples: usize, seed: u64) -> Result<BoxInCube> {
    let d = r.dim();
    if d < 2 {
        return Err(Error::InvalidParameter("d must be at least 2".into()));
    }
    let mut rng = substream(seed, "box-in-cube", 0);
    let mut local = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (k, l) in local.iter_mut().enumerate() {
            *l = rng.random_range(-1.0..=1.0) * r.half_extents[k];
        }
        let inside = (0..d).all(|k| {
            let v = r.center[k] + (0..d).map(|j| r.frame[k * d + j] * local[j]).sum::<f64>();
            v.abs() <= t
        });
        if inside {
            hits += 1;
        }
    }
    let f = hits as f64 / samples.max(1) as f64;
    let se = (f * (1.0 - f) / samples.max(1) as f64).sqrt();
    let bound = 5.0 * t * d as f64;
    let conclusion = r.corners().iter().all(|c| c.iter().all(|v| v.abs() <= bound + 1e-9));
    Ok(BoxInCube { fraction: f, std_error: se, hypothesis: f >= 0.5, conclusion })
}

/// Half-spaces `a·x ≤ b` cutting the face region of face `(axis, sign)` out of
/// `L_i`: points of the closed layer nearest to that face of `Q_{2^i}`.
pub fn face_region_halfspaces(d: usize, i: u32, axis: usize, sign: f64) -> Vec<(Vec<f64>, f64)> {
    let t = pow2(i as i32);
    let mut hs = Vec::new();
    let mut a = vec![0.0; d];
    a[axis] = sign;
    hs.push((a.clone(), t));
    let inner = if i == 1 { 0.0 } else { t / 2.0 };
    hs.push((a.iter().map(|v| -v).collect(), -inner));
    for l in 0..d {
        if l == axis {
            continue;
        }
        for s in [1.0, -1.0] {
            let mut b = vec![0.0; d];
            b[l] = s;
            b[axis] = -sign;
            hs.push((b, 0.0));
        }
    }
    hs
}

/// A convex piece `K ⊆ L_i ∩ R`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerWitness {
    pub layer: u32,
    pub m: u32,
    pub j: u32,
    pub axis: usize,
    pub sign: f64,
    /// `K = R ∩ {a·x ≤ b}`.
    pub halfspaces: Vec<(Vec<f64>, f64)>,
    /// Exact polygon (planar case).
    pub polygon: Option<ConvexPolygon>,
    pub volume: f64,
    /// Standard error of `volume` when estimated by sampling, else 0.
    pub std_error: f64,
}

impl LayerWitness {
    /// Short side of the inscribed rectangle of `K` (planar case).
    pub fn thickness(&self) -> Result<f64> {
        let poly =
            self.polygon.as_ref().ok_or_else(|| Error::InvalidParameter("thickness is computed for d = 2".into()))?;
        let s = box_sandwich_2d(poly)?;
        Ok(2.0 * s.inner.half_extents.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Finds a layer `i ∈ {m−j,…,m}` and a face region whose intersection with the
/// unit-volume box `R` has volume at least `C_d`.
pub fn find_layer_witness(r: &OrientedBox, seed: u64) -> Result<LayerWitness> {
    let d = r.dim();
    if d < 2 {
        return Err(Error::InvalidParameter("d must be at least 2".into()));
    }
    if (r.volume() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("box volume {} is not 1", r.volume())));
    }
    let reach = r.corners().iter().flat_map(|c| c.iter().map(|v| v.abs()).collect::<Vec<_>>()).fold(0.0f64, f64::max);
    let m = layer_index(&[reach]);
    let j = j_d(d);
    let lo = m.saturating_sub(j).max(1);
    let cd = c_d(d);
    let mut best: Option<LayerWitness> = None;
    for i in lo..=m {
        for axis in 0..d {
            for sign in [1.0, -1.0] {
                let hs = face_region_halfspaces(d, i, axis, sign);
                let (polygon, volume, se) = if d == 2 {
                    let mut poly = Some(r.to_polygon());
                    for (a, b) in &hs {
                        poly = poly.and_then(|p| p.clip([a[0], a[1]], *b));
                    }
                    let v = poly.as_ref().map_or(0.0, |p| p.area());
                    (poly, v, 0.0)
                } else {
                    let (v, se) = sampled_volume(r, &hs, 1_000_000, seed ^ u64::from(i) << 8 ^ axis as u64)?;
                    (None, v, se)
                };
                let lower = volume - 3.0 * se;
                if best.as_ref().is_none_or(|b| lower > b.volume - 3.0 * b.std_error) {
                    best = Some(LayerWitness {
                        layer: i,
                        m,
                        j,
                        axis,
                        sign,
                        halfspaces: hs,
                        polygon,
                        volume,
                        std_error: se,
                    });
                }
            }
        }
    }
    let w = best.expect("at least one candidate");
    let ok = if d == 2 { w.volume >= cd } else { w.volume >= cd * (1.0 + 3.0 * w.std_error / cd.max(1e-300)) };
    if !ok {
        return Err(Error::VerificationFailed(format!("layer witness volume {} below C_d = {cd}", w.volume)));
    }
    Ok(w)
}

fn sampled_volume(r: &OrientedBox, hs: &[(Vec<f64>, f64)], samples: usize, seed: u64) -> Result<(f64, f64)> {
    let d = r.dim();
    let mut rng = substream(seed, "layer-witness", 0);
    let mut local = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (k, l) in local.iter_mut().enumerate() {
            *l = rng.random_range(-1.0..=1.0) * r.half_extents[k];
        }
        let mut p = linalg::mat_vec(&r.frame, d, &local);
        for (pk, ck) in p.iter_mut().zip(&r.center) {
            *pk += ck;
        }
        if hs.iter().all(|(a, b)| linalg::dot(a, &p) <= *b) {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    let v = r.volume();
    Ok((f * v, v * (f * (1.0 - f) / samples as f64).sqrt()))
}

/// Builds a net on `Q_n` (edge `n`) meeting every box of volume 1.
pub trait NetBuilder: Sync {
    fn build(&self, n: u64, seed: u64) -> Result<NetResult>;
}

/// Random-grid nets with certification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbabilisticNets {
    pub d: usize,
    pub c: f64,
    pub max_attempts: u64,
    pub search: SearchParams,
}

impl NetBuilder for ProbabilisticNets {
    fn build(&self, n: u64, seed: u64) -> Result<NetResult> {
        let params = NetParams {
            n,
            d: self.d,
            c: self.c,
            seed,
            max_attempts: self.max_attempts,
            restarts: self.search.restarts,
            iterations: self.search.iterations,
        };
        build_probabilistic_net(&params)
    }
}

/// Parameters of [`assemble_danzer`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayeredParams {
    pub d: usize,
    pub max_layer: u32,
    pub seed: u64,
    /// Sampling constant used to size each net.
    pub c: f64,
    /// Every layer net meets every box of this volume inside its cube.
    pub box_volume: f64,
    /// Refuse builds whose expected size exceeds this many points.
    pub max_points: f64,
}

impl LayeredParams {
    pub fn new(d: usize, max_layer: u32, seed: u64) -> Self {
        LayeredParams { d, max_layer, seed, c: 6.0, box_volume: 256.0, max_points: 5e7 }
    }

    /// Volume of convex sets the assembled set is built to meet:
    /// `box_volume·α_d/C_d`.
    pub fn convex_volume(&self) -> f64 {
        self.box_volume * alpha_d(self.d) as f64 / c_d(self.d)
    }

    /// Grid parameter of the net for layer `i`, or `None` when no box of the
    /// target volume fits in `Q_{2^i}`.
    pub fn net_n(&self, i: u32) -> Option<u64> {
        let edge = pow2(i as i32 + 1);
        if self.box_volume > edge.powi(self.d as i32) {
            return None;
        }
        let want = (edge / self.box_volume.powf(1.0 / self.d as f64)).ceil().max(2.0) as u64;
        let mut n = want;
        while sampling_probability(n, self.d, self.c) > 1.0 {
            n += 1;
        }
        Some(n)
    }
}

/// Provenance of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer: u32,
    pub n: Option<u64>,
    pub seed: u64,
    /// Factor mapping `Q_n` onto `Q_{2^i}`.
    pub scale: f64,
    /// Net parameter on `[−1,1]^d`: `(2/n)^d`.
    pub epsilon: f64,
    /// Volume of boxes in `Q_{2^i}` the layer net is certified to meet.
    pub certified_box_volume: f64,
    pub unclipped_size: usize,
    pub size: usize,
    pub certified: bool,
    pub attempts: u64,
    /// Verification scores of the layer net; `None` when the layer has none.
    pub worst_axis_area: Option<f64>,
    pub adversarial_best_score: Option<f64>,
}

/// Layered Danzer set with per-layer provenance.
#[derive(Clone, Debug)]
pub struct DanzerBuild {
    pub params: LayeredParams,
    pub per_layer_nets: Vec<PointSet>,
    pub assembled: PointSet,
    pub c_d: f64,
    pub alpha_d: f64,
    pub layers: Vec<LayerRecord>,
    pub certified: bool,
}

/// JSON build manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildManifest {
    pub generator: String,
    pub d: usize,
    pub max_layer: u32,
    pub seed: u64,
    pub c: f64,
    pub c_d: f64,
    pub alpha_d: f64,
    pub box_volume: f64,
    pub convex_volume: f64,
    pub size: usize,
    pub certified: bool,
    pub layers: Vec<LayerRecord>,
}

impl DanzerBuild {
    pub fn manifest(&self) -> BuildManifest {
        BuildManifest {
            generator: "layered".into(),
            d: self.params.d,
            max_layer: self.params.max_layer,
            seed: self.params.seed,
            c: self.params.c,
            c_d: self.c_d,
            alpha_d: self.alpha_d,
            box_volume: self.params.box_volume,
            convex_volume: self.params.convex_volume(),
            size: self.assembled.len(),
            certified: self.certified,
            layers: self.layers.clone(),
        }
    }
}

/// Builds one net per layer, maps `Q_n` onto `Q_{2^i}`, clips to `L_i`, and
/// takes the union.
pub fn assemble_danzer(params: &LayeredParams, builder: &dyn NetBuilder) -> Result<DanzerBuild> {
    let d = params.d;
    if d < 2 {
        return Err(Error::InvalidParameter("d must be at least 2".into()));
    }
    if params.max_layer == 0 || params.max_layer > 40 {
        return Err(Error::InvalidParameter("max_layer must be in 1..=40".into()));
    }
    if !(params.box_volume > 0.0) {
        return Err(Error::InvalidParameter("box volume must be positive".into()));
    }
    let expected: f64 =
        (1..=params.max_layer).filter_map(|i| params.net_n(i)).map(|n| expected_net_size(n, d, params.c)).sum();
    if expected > params.max_points {
        return Err(Error::GuardExceeded(format!("expected {expected:.3e} points exceeds {:.3e}", params.max_points)));
    }
    let partition = LayerPartition { dim: d, max_layer: params.max_layer };
    let mut per_layer = Vec::new();
    let mut records = Vec::new();
    let mut coords = Vec::new();
    for i in 1..=params.max_layer {
        let seed = derive_seed(params.seed, "layer", u64::from(i));
        let edge = pow2(i as i32 + 1);
        let (net, rec) = match params.net_n(i) {
            None => (
                PointSet::empty(d),
                LayerRecord {
                    layer: i,
                    n: None,
                    seed,
                    scale: 0.0,
                    epsilon: 1.0,
                    certified_box_volume: params.box_volume,
                    unclipped_size: 0,
                    size: 0,
                    certified: true,
                    attempts: 0,
                    worst_axis_area: None,
                    adversarial_best_score: None,
                },
            ),
            Some(n) => {
                let r = builder.build(n, seed)?;
                let scale = edge / n as f64;
                let scaled: Vec<f64> = r.net.coords().iter().map(|v| v * scale).collect();
                let scaled = PointSet::new(d, scaled)?;
                let clipped = scaled.filter(|p| partition.contains(i, p));
                let rec = LayerRecord {
                    layer: i,
                    n: Some(n),
                    seed,
                    scale,
                    epsilon: (2.0 / n as f64).powi(d as i32),
                    certified_box_volume: scale.powi(d as i32),
                    unclipped_size: r.net.len(),
                    size: clipped.len(),
                    certified: r.certified,
                    attempts: r.attempts,
                    worst_axis_area: Some(r.worst_axis_area),
                    adversarial_best_score: Some(r.adversarial_best_score),
                };
                (clipped, rec)
            }
        };
        coords.extend_from_slice(net.coords());
        per_layer.push(net.with_meta("layer", i));
        records.push(rec);
    }
    let certified = records.iter().all(|r| r.certified);
    let assembled = PointSet::new(d, coords)?
        .with_meta("generator", "layered")
        .with_meta("d", d as u64)
        .with_meta("max_layer", params.max_layer)
        .with_meta("seed", params.seed)
        .with_meta("c", params.c)
        .with_meta("box_volume", params.box_volume)
        .with_meta("certified", certified);
    Ok(DanzerBuild {
        params: params.clone(),
        per_layer_nets: per_layer,
        assembled,
        c_d: c_d(d),
        alpha_d: alpha_d(d) as f64,
        layers: records,
        certified,
    })
}

/// One row of a growth curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub t: f64,
    pub count: usize,
    /// `count / (T^d·ln T)`.
    pub normalized: f64,
}

/// Counts in `Q_T` for each `T`.
pub fn growth_curve(y: &PointSet, radii: &[f64]) -> Result<Vec<GrowthRow>> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("radii must be increasing".into()));
    }
    if radii.iter().any(|&t| t < 2.0) {
        return Err(Error::InvalidParameter("radii must be at least 2".into()));
    }
    radii
        .iter()
        .map(|&t| {
            let count = y.count_in_region(&AxisBox::cube(y.dim(), t)?)?;
            Ok(GrowthRow { t, count, normalized: count as f64 / (t.powi(y.dim() as i32) * t.ln()) })
        })
        .collect()
}

/// Count cap for assembled-set searches: boxes holding this many points
/// are far from empty.
pub const ASSEMBLED_COUNT_CAP: usize = 16;

/// Result of checking an assembled set against boxes of a fixed volume.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssembledCheck {
    pub layer: u32,
    pub restarts: usize,
    pub empty_box: Option<OrientedBox>,
    pub best_score: f64,
}

/// Adversarial search for empty boxes of `volume` inside each `Q_{2^i}` large
/// enough to hold one, splitting `total_restarts` evenly.
pub fn verify_assembled(
    y: &PointSet,
    max_layer: u32,
    volume: f64,
    total_restarts: usize,
    iterations: usize,
    seed: u64,
) -> Result<Vec<AssembledCheck>> {
    let d = y.dim();
    let layers: Vec<u32> = (1..=max_layer).filter(|&i| pow2(i as i32 + 1).powi(d as i32) >= volume).collect();
    if layers.is_empty() {
        return Ok(Vec::new());
    }
    let per = total_restarts.div_ceil(layers.len());
    // Force the index before fanning out.
    let _ = y.index();
    layers
        .par_iter()
        .map(|&i| {
            let region = AxisBox::cube(d, pow2(i as i32))?;
            let r = adversarial_box_search(
                y,
                &region,
                volume,
                &SearchParams { restarts: per, iterations, count_cap: Some(ASSEMBLED_COUNT_CAP) },
                derive_seed(seed, "assembled", u64::from(i)),
            )?;
            Ok(AssembledCheck { layer: i, restarts: per, empty_box: r.empty_box, best_score: r.best_score })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_values() {
        let (c2, a2) = constants(2).unwrap();
        let (c3, a3) = constants(3).unwrap();
        assert!((c2 - 0.0289224).abs() < 1e-6);
        assert!((c3 - 0.0169829).abs() < 1e-6);
        assert_eq!((a2, a3), (36.0, 729.0));
        assert!(c3 < c2);
        assert_eq!(j_d(2), 4);
        assert_eq!(j_d(3), 4);
        assert!(constants(1).is_err());
    }

    #[test]
    fn layer_examples() {
        assert_eq!(layer_index(&[1.0, 0.0]), 1);
        assert_eq!(layer_index(&[2.0, 0.0]), 1);
        assert_eq!(layer_index(&[3.0, 0.0]), 2);
        assert_eq!(layer_index(&[16.0, 16.0]), 4);
        assert_eq!(layer_index(&[4.000000001, 0.0]), 3);
    }

    #[test]
    fn layers_tile_the_cube() {
        let m = 10;
        let part = LayerPartition { dim: 2, max_layer: m };
        let mut rng: ChaCha8Rng = substream(1, "test", 0);
        for _ in 0..100_000 {
            let s = pow2(rng.random_range(0..=m as i32));
            let x = [rng.random_range(-s..=s), rng.random_range(-s..=s)];
            let i = layer_index(&x);
            let norm = x[0].abs().max(x[1].abs());
            assert!(norm <= pow2(i as i32));
            assert!(i == 1 || norm > pow2(i as i32 - 1));
            assert_eq!((1..=m).filter(|&k| part.contains(k, &x)).count(), 1);
        }
        let total: f64 = (1..=m).map(|i| part.volume(i)).sum();
        assert_eq!(total, pow2(m as i32 + 1).powi(2));
    }

    #[test]
    fn box_in_cube_examples() {
        let q = OrientedBox::from_angle([0.0, 0.0], 0.0, [3.0, 3.0]).unwrap();
        let c = check_box_in_cube(&q, 3.0, 10_000, 1).unwrap();
        assert!(c.hypothesis && c.conclusion);
        let far = OrientedBox::from_angle([100.0, 0.0], 0.3, [1.0, 1.0]).unwrap();
        assert!(!check_box_in_cube(&far, 3.0, 10_000, 1).unwrap().hypothesis);
    }

    #[test]
    fn layer_witness_examples() {
        let r = OrientedBox::from_angle([100.0, 0.0], 0.0, [0.5, 0.5]).unwrap();
        let w = find_layer_witness(&r, 0).unwrap();
        assert_eq!(w.layer, 7);
        assert!((w.volume - 1.0).abs() < 1e-9);
        let thin = OrientedBox::from_angle([0.0, 0.0], 0.0, [50.0, 0.005]).unwrap();
        let w = find_layer_witness(&thin, 0).unwrap();
        assert!(w.volume >= 1.0 / (2.0 * 20f64.log2()) / 4.0);
        assert!(w.volume >= c_d(2));
        let bad = OrientedBox::from_angle([0.0, 0.0], 0.0, [1.0, 1.0]).unwrap();
        assert!(find_layer_witness(&bad, 0).is_err());
    }

    #[test]
    fn layer_witness_thickness_is_positive() {
        let r = OrientedBox::from_angle([7.0, -3.0], 0.7, [2.0, 0.125]).unwrap();
        let w = find_layer_witness(&r, 0).unwrap();
        let t = w.thickness().unwrap();
        assert!(t > 0.0 && t <= 0.25 + 1e-9);
    }

    #[test]
    fn layer_witness_in_three_dimensions() {
        let frame = linalg::identity(3);
        let r = OrientedBox::new(vec![5.0, 1.0, -2.0], frame, vec![0.5, 0.5, 0.5]).unwrap();
        let w = find_layer_witness(&r, 3).unwrap();
        assert!(w.volume >= c_d(3));
    }

    #[test]
    fn net_sizes_follow_box_volume() {
        let p = LayeredParams::new(2, 12, 0);
        assert_eq!(p.net_n(1), None);
        assert_eq!(p.net_n(3), Some(3));
        assert_eq!(p.net_n(12), Some(512));
        assert!((p.convex_volume() - 256.0 * 36.0 / c_d(2)).abs() < 1e-6);
    }

    struct FastNets;
    impl NetBuilder for FastNets {
        fn build(&self, n: u64, seed: u64) -> Result<NetResult> {
            let p = sampling_probability(n, 2, 6.0);
            let net = crate::nets::sample_grid(crate::nets::GridGamma { n, dim: 2 }, p, seed, 0);
            Ok(NetResult {
                net,
                params: NetParams::new(n, 2, 6.0, seed),
                certified: false,
                attempts: 1,
                worst_axis_area: f64::NAN,
                adversarial_best_score: f64::NAN,
                sparse_grid_boxes: 0,
            })
        }
    }

    #[test]
    fn assembly_clips_to_layers() {
        let mut p = LayeredParams::new(2, 7, 3);
        p.box_volume = 16.0;
        let b = assemble_danzer(&p, &FastNets).unwrap();
        let part = LayerPartition { dim: 2, max_layer: 7 };
        for (k, net) in b.per_layer_nets.iter().enumerate() {
            assert!(net.iter().all(|x| part.contains(k as u32 + 1, x)));
        }
        let total: usize = b.per_layer_nets.iter().map(|n| n.len()).sum();
        assert_eq!(total, b.assembled.len());
        assert!(!b.certified);
        let again = assemble_danzer(&p, &FastNets).unwrap();
        assert_eq!(again.assembled.coords(), b.assembled.coords());
        let mut big = LayeredParams::new(2, 20, 3);
        big.max_points = 1e6;
        assert!(matches!(assemble_danzer(&big, &FastNets), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn growth_examples() {
        let z = PointSet::integer_grid(2, 20);
        let g = growth_curve(&z, &[10.0]).unwrap();
        assert_eq!(g[0].count, 441);
        let e = growth_curve(&PointSet::empty(2), &[2.0, 4.0]).unwrap();
        assert!(e.iter().all(|r| r.count == 0 && r.normalized == 0.0));
        assert!(growth_curve(&z, &[4.0, 3.0]).is_err());
    }
}
