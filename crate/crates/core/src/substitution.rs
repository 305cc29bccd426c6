//! Planar substitution tilings: rules, patches, Delone sets from choice
//! functions, and certified empty capsules.
//!
//! A placement `(M, t, c)` of parent `p` puts the copy `ζ·M·x + t` of
//! prototile `c` inside prototile `p`. Patches live in inflated coordinates,
//! where every tile is congruent to its prototile.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{
    distance_to_polygon_boundary, point_in_polygon, point_segment_distance_2d, polygon_signed_area,
    segment_segment_distance_2d, unit_ball_volume, Capsule, Region, Volume,
};
use crate::pointset::PointSet;
use crate::rng::substream;
use crate::{Error, Result};

/// Maximum tile count of an expanded patch.
pub const MAX_TILES: u128 = 1_000_000;

/// A planar isometry `x ↦ m·x + t` (row-major `m`, possibly a reflection).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub m: [f64; 4],
    pub t: [f64; 2],
}

impl Isometry {
    pub const IDENTITY: Isometry = Isometry { m: [1.0, 0.0, 0.0, 1.0], t: [0.0, 0.0] };

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [self.m[0] * p[0] + self.m[1] * p[1] + self.t[0], self.m[2] * p[0] + self.m[3] * p[1] + self.t[1]]
    }

    pub fn is_reflection(&self) -> bool {
        self.m[0] * self.m[3] - self.m[1] * self.m[2] < 0.0
    }

    /// The affine map sending triangle `p` onto triangle `q`.
    fn from_triangles(p: &[[f64; 2]], q: &[[f64; 2]]) -> Isometry {
        let (u1, u2) = ([p[1][0] - p[0][0], p[1][1] - p[0][1]], [p[2][0] - p[0][0], p[2][1] - p[0][1]]);
        let (v1, v2) = ([q[1][0] - q[0][0], q[1][1] - q[0][1]], [q[2][0] - q[0][0], q[2][1] - q[0][1]]);
        let det = u1[0] * u2[1] - u2[0] * u1[1];
        // inverse of [u1 u2] (columns)
        let inv = [u2[1] / det, -u2[0] / det, -u1[1] / det, u1[0] / det];
        let m = [
            v1[0] * inv[0] + v2[0] * inv[2],
            v1[0] * inv[1] + v2[0] * inv[3],
            v1[1] * inv[0] + v2[1] * inv[2],
            v1[1] * inv[1] + v2[1] * inv[3],
        ];
        let t = [q[0][0] - (m[0] * p[0][0] + m[1] * p[0][1]), q[0][1] - (m[2] * p[0][0] + m[3] * p[0][1])];
        Isometry { m, t }
    }
}

fn is_orthogonal(m: &[f64; 4]) -> bool {
    let a = m[0] * m[0] + m[2] * m[2];
    let b = m[1] * m[1] + m[3] * m[3];
    let c = m[0] * m[1] + m[2] * m[3];
    (a - 1.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9 && c.abs() < 1e-9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prototile {
    pub id: usize,
    /// Counterclockwise vertices.
    pub vertices: Vec<[f64; 2]>,
}

impl Prototile {
    pub fn area(&self) -> f64 {
        polygon_signed_area(&self.vertices).abs()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let v = &self.vertices;
        let n = v.len();
        let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (p, q) = (v[i], v[(i + 1) % n]);
            let w = p[0] * q[1] - q[0] * p[1];
            a += w;
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
        }
        [cx / (3.0 * a), cy / (3.0 * a)]
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub matrix: [f64; 4],
    pub translation: [f64; 2],
    pub child: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChildList {
    pub parent: usize,
    pub placements: Vec<Placement>,
}

/// Serialized rule document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleDocument {
    pub zeta: f64,
    pub prototiles: Vec<Prototile>,
    pub children: Vec<ChildList>,
}

/// A validated substitution rule: `children[p]` dissects prototile `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionRule {
    pub zeta: f64,
    pub prototiles: Vec<Prototile>,
    pub children: Vec<Vec<Placement>>,
}

impl SubstitutionRule {
    /// Validates polygons, isometries, and the tiling condition (area
    /// conservation exactly, disjointness and cover by sampling).
    pub fn new(zeta: f64, mut prototiles: Vec<Prototile>, children: Vec<Vec<Placement>>) -> Result<Self> {
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::InvalidParameter("zeta must lie in (0, 1)".into()));
        }
        if prototiles.is_empty() || children.len() != prototiles.len() {
            return Err(Error::InvalidParameter("one child list per prototile is required".into()));
        }
        for (k, p) in prototiles.iter_mut().enumerate() {
            if p.id != k {
                return Err(Error::InvalidParameter("prototile ids must be 0..n in order".into()));
            }
            if p.vertices.len() < 3 || p.vertices.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::Degenerate(format!("prototile {k} is not a polygon")));
            }
            let a = polygon_signed_area(&p.vertices);
            if a.abs() < 1e-12 {
                return Err(Error::Degenerate(format!("prototile {k} has zero area")));
            }
            if a < 0.0 {
                p.vertices.reverse();
            }
        }
        let rule = SubstitutionRule { zeta, prototiles, children };
        for (p, list) in rule.children.iter().enumerate() {
            let mut area = 0.0;
            for pl in list {
                if pl.child >= rule.prototiles.len() {
                    return Err(Error::InvalidParameter("placement child out of range".into()));
                }
                if !is_orthogonal(&pl.matrix) {
                    return Err(Error::InvalidParameter("placement matrix is not orthogonal".into()));
                }
                area += zeta * zeta * rule.prototiles[pl.child].area();
            }
            let parent = rule.prototiles[p].area();
            if (area - parent).abs() > 1e-9 * parent.max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "children of prototile {p} cover area {area}, parent has {parent}"
                )));
            }
        }
        rule.check_dissections(2000, 0)?;
        Ok(rule)
    }

    fn child_polygon(&self, pl: &Placement) -> Vec<[f64; 2]> {
        let z = self.zeta;
        self.prototiles[pl.child]
            .vertices
            .iter()
            .map(|v| {
                [
                    z * (pl.matrix[0] * v[0] + pl.matrix[1] * v[1]) + pl.translation[0],
                    z * (pl.matrix[2] * v[0] + pl.matrix[3] * v[1]) + pl.translation[1],
                ]
            })
            .collect()
    }

    /// Random interior points of each parent must lie in exactly one child
    /// interior, and every child must lie inside its parent.
    fn check_dissections(&self, samples: usize, seed: u64) -> Result<()> {
        use rand::Rng;
        for (p, list) in self.children.iter().enumerate() {
            let parent = &self.prototiles[p].vertices;
            let kids: Vec<Vec<[f64; 2]>> = list.iter().map(|pl| self.child_polygon(pl)).collect();
            for k in &kids {
                if k.iter().any(|v| !point_in_polygon(*v, parent)) {
                    return Err(Error::InvalidParameter(format!("a child of prototile {p} leaves its parent")));
                }
            }
            let (lo, hi) = bbox(parent);
            let mut rng = substream(seed, "rule-check", p as u64);
            for _ in 0..samples {
                let q = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
                if !point_in_polygon(q, parent) || distance_to_polygon_boundary(q, parent) < 1e-7 {
                    continue;
                }
                let mut strict = 0;
                let mut closed = 0;
                for k in &kids {
                    if point_in_polygon(q, k) {
                        closed += 1;
                        if distance_to_polygon_boundary(q, k) > 1e-7 {
                            strict += 1;
                        }
                    }
                }
                if strict > 1 {
                    return Err(Error::InvalidParameter(format!("children of prototile {p} overlap")));
                }
                if closed == 0 {
                    return Err(Error::InvalidParameter(format!("children of prototile {p} leave a gap")));
                }
            }
        }
        Ok(())
    }

    pub fn from_document(doc: &RuleDocument) -> Result<Self> {
        let n = doc.prototiles.len();
        let mut children = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        for c in &doc.children {
            if c.parent >= n || seen[c.parent] {
                return Err(Error::InvalidParameter("bad or repeated parent in children".into()));
            }
            seen[c.parent] = true;
            children[c.parent] = c.placements.clone();
        }
        SubstitutionRule::new(doc.zeta, doc.prototiles.clone(), children)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RuleDocument = serde_json::from_str(text)?;
        SubstitutionRule::from_document(&doc)
    }

    pub fn to_document(&self) -> RuleDocument {
        RuleDocument {
            zeta: self.zeta,
            prototiles: self.prototiles.clone(),
            children: self
                .children
                .iter()
                .enumerate()
                .map(|(parent, placements)| ChildList { parent, placements: placements.clone() })
                .collect(),
        }
    }

    pub fn xi(&self) -> f64 {
        1.0 / self.zeta
    }
}

fn bbox(v: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in v {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Substitution matrix and primitivity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionMatrix {
    /// `a[i][j]`: copies of prototile `i` in the dissection of prototile `j`.
    pub a: Vec<Vec<u64>>,
    pub primitive: bool,
    /// Smallest `m` with `A^m > 0`.
    pub power: Option<u32>,
}

pub fn substitution_matrix(rule: &SubstitutionRule) -> SubstitutionMatrix {
    let n = rule.prototiles.len();
    let mut a = vec![vec![0u64; n]; n];
    for (j, list) in rule.children.iter().enumerate() {
        for pl in list {
            a[pl.child][j] += 1;
        }
    }
    let b: Vec<Vec<bool>> = a.iter().map(|r| r.iter().map(|&x| x > 0).collect()).collect();
    let mut cur = b.clone();
    let limit = ((n - 1) * (n - 1) + 1) as u32;
    let mut power = None;
    for m in 1..=limit {
        if cur.iter().all(|r| r.iter().all(|&x| x)) {
            power = Some(m);
            break;
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).any(|k| cur[i][k] && b[k][j]);
            }
        }
        cur = next;
    }
    SubstitutionMatrix { a, primitive: power.is_some(), power }
}

/// Exact power `A^m` with 128-bit entries.
pub fn matrix_power(a: &[Vec<u64>], m: u32) -> Vec<Vec<u128>> {
    let n = a.len();
    let mut out: Vec<Vec<u128>> = (0..n).map(|i| (0..n).map(|j| u128::from(i == j)).collect()).collect();
    for _ in 0..m {
        let mut next = vec![vec![0u128; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] =
                    (0..n).map(|k| out[i][k].saturating_mul(u128::from(a[k][j]))).fold(0u128, u128::saturating_add);
            }
        }
        out = next;
    }
    out
}

/// Predicted tile count of the patch of generation `m` rooted at `root`.
pub fn predicted_tile_count(rule: &SubstitutionRule, root: usize, m: u32) -> u128 {
    let am = matrix_power(&substitution_matrix(rule).a, m);
    am.iter().map(|row| row[root]).fold(0u128, u128::saturating_add)
}

/// An element `a₀ + a₁ζ + a₂ζ² + a₃ζ³` of `ℤ[ζ]`, `ζ = e^{2πi/5}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cyclo5(pub [i64; 4]);

impl Cyclo5 {
    pub const ZERO: Cyclo5 = Cyclo5([0, 0, 0, 0]);
    pub const ONE: Cyclo5 = Cyclo5([1, 0, 0, 0]);
    /// `φ = −ζ² − ζ³`.
    pub const PHI: Cyclo5 = Cyclo5([0, 0, -1, -1]);
    /// `1/φ = φ − 1`.
    pub const INV_PHI: Cyclo5 = Cyclo5([-1, 0, -1, -1]);

    pub fn zeta_pow(k: u32) -> Cyclo5 {
        let mut z = Cyclo5::ONE;
        for _ in 0..k % 5 {
            z = z.mul_zeta();
        }
        z
    }

    /// Uses `ζ⁴ = −1 − ζ − ζ² − ζ³`.
    pub fn mul_zeta(self) -> Cyclo5 {
        let [a0, a1, a2, a3] = self.0;
        Cyclo5([-a3, a0 - a3, a1 - a3, a2 - a3])
    }

    pub fn to_xy(self) -> [f64; 2] {
        let mut p = [0.0, 0.0];
        for k in 0..4 {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
            p[0] += self.0[k] as f64 * t.cos();
            p[1] += self.0[k] as f64 * t.sin();
        }
        p
    }
}

impl std::ops::Add for Cyclo5 {
    type Output = Cyclo5;
    fn add(self, o: Cyclo5) -> Cyclo5 {
        Cyclo5(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl std::ops::Sub for Cyclo5 {
    type Output = Cyclo5;
    fn sub(self, o: Cyclo5) -> Cyclo5 {
        Cyclo5(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl std::ops::Neg for Cyclo5 {
    type Output = Cyclo5;
    fn neg(self) -> Cyclo5 {
        Cyclo5(self.0.map(|x| -x))
    }
}

impl std::ops::Mul for Cyclo5 {
    type Output = Cyclo5;
    fn mul(self, o: Cyclo5) -> Cyclo5 {
        let mut acc = Cyclo5::ZERO;
        let mut shifted = self;
        for k in 0..4 {
            let c = o.0[k];
            acc = Cyclo5(std::array::from_fn(|j| acc.0[j] + shifted.0[j] * c));
            shifted = shifted.mul_zeta();
        }
        acc
    }
}

/// A Robinson triangle with exact vertices `(apex, b, c)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ExactTriangle {
    kind: usize,
    v: [Cyclo5; 3],
}

const OBTUSE: usize = 0;
const ACUTE: usize = 1;

fn penrose_prototiles_exact() -> [[Cyclo5; 3]; 2] {
    [
        // Apex angle 108°: C = e^{3πi/5} = −ζ⁴.
        [Cyclo5::ZERO, Cyclo5::ONE, -Cyclo5::zeta_pow(4)],
        // Apex angle 36°: C = e^{πi/5} = −ζ³.
        [Cyclo5::ZERO, Cyclo5::ONE, -Cyclo5::zeta_pow(3)],
    ]
}

/// Inflates by `φ` and dissects.
fn penrose_split(t: &ExactTriangle) -> Vec<ExactTriangle> {
    let [a, b, c] = t.v.map(|x| x * Cyclo5::PHI);
    let toward = |from: Cyclo5, to: Cyclo5| from + (to - from) * Cyclo5::INV_PHI;
    if t.kind == OBTUSE {
        let q = toward(b, a);
        let r = toward(b, c);
        vec![
            ExactTriangle { kind: OBTUSE, v: [r, c, a] },
            ExactTriangle { kind: OBTUSE, v: [q, r, b] },
            ExactTriangle { kind: ACUTE, v: [r, q, a] },
        ]
    } else {
        let p = toward(a, b);
        vec![ExactTriangle { kind: ACUTE, v: [c, p, b] }, ExactTriangle { kind: OBTUSE, v: [p, c, a] }]
    }
}

/// How patches are generated.
#[derive(Clone, Debug, PartialEq)]
enum Engine {
    Float,
    Penrose,
}

/// A rule plus its expansion engine.
#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionSystem {
    pub name: String,
    pub rule: SubstitutionRule,
    engine: Engine,
}

impl SubstitutionSystem {
    pub fn from_rule(name: &str, rule: SubstitutionRule) -> Self {
        SubstitutionSystem { name: name.into(), rule, engine: Engine::Float }
    }

    /// The chair (L-tromino) rule with `ζ = 1/2`.
    pub fn chair() -> Self {
        let proto =
            Prototile { id: 0, vertices: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]] };
        let pl = |matrix: [f64; 4], translation: [f64; 2]| Placement { matrix, translation, child: 0 };
        let children = vec![vec![
            pl([1.0, 0.0, 0.0, 1.0], [0.0, 0.0]),
            pl([1.0, 0.0, 0.0, 1.0], [0.5, 0.5]),
            pl([0.0, -1.0, 1.0, 0.0], [2.0, 0.0]),
            pl([0.0, 1.0, -1.0, 0.0], [0.0, 2.0]),
        ]];
        let rule = SubstitutionRule::new(0.5, vec![proto], children).expect("chair rule is valid");
        SubstitutionSystem { name: "chair".into(), rule, engine: Engine::Float }
    }

    /// Robinson triangles (0: obtuse, 1: acute) with `ζ = 1/φ`; patches use
    /// exact arithmetic in `ℤ[e^{2πi/5}]`.
    pub fn penrose_robinson() -> Self {
        let exact = penrose_prototiles_exact();
        let protos: Vec<Prototile> = exact
            .iter()
            .enumerate()
            .map(|(id, v)| Prototile { id, vertices: v.iter().map(|z| z.to_xy()).collect() })
            .collect();
        let zeta = 2.0 / (1.0 + 5f64.sqrt());
        let children = (0..2)
            .map(|kind| {
                penrose_split(&ExactTriangle { kind, v: exact[kind] })
                    .iter()
                    .map(|ch| {
                        let q: Vec<[f64; 2]> = ch.v.iter().map(|z| z.to_xy()).collect();
                        let iso = Isometry::from_triangles(&protos[ch.kind].vertices, &q);
                        Placement { matrix: iso.m, translation: [zeta * iso.t[0], zeta * iso.t[1]], child: ch.kind }
                    })
                    .collect()
            })
            .collect();
        // Triangles from the exact vertex list are counterclockwise.
        let rule = SubstitutionRule::new(zeta, protos, children).expect("Robinson rule is valid");
        SubstitutionSystem { name: "penrose-robinson".into(), rule, engine: Engine::Penrose }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "chair" => Ok(SubstitutionSystem::chair()),
            "penrose-robinson" | "penrose" => Ok(SubstitutionSystem::penrose_robinson()),
            _ => Err(Error::InvalidParameter(format!("unknown substitution system {name:?}"))),
        }
    }

    /// The patch `(ξH)^m(T_root)`.
    pub fn expand_patch(&self, root: usize, m: u32) -> Result<Patch> {
        if root >= self.rule.prototiles.len() {
            return Err(Error::InvalidParameter("root prototile out of range".into()));
        }
        let predicted = predicted_tile_count(&self.rule, root, m);
        if predicted > MAX_TILES {
            return Err(Error::GuardExceeded(format!("{predicted} tiles exceed {MAX_TILES}")));
        }
        let tiles = match self.engine {
            Engine::Float => {
                let xi = self.rule.xi();
                let mut cur = vec![(root, Isometry::IDENTITY)];
                for _ in 0..m {
                    let mut next = Vec::with_capacity(cur.len() * 4);
                    for &(p, g) in &cur {
                        for pl in &self.rule.children[p] {
                            let r = g.m;
                            let mm = pl.matrix;
                            let rm = [
                                r[0] * mm[0] + r[1] * mm[2],
                                r[0] * mm[1] + r[1] * mm[3],
                                r[2] * mm[0] + r[3] * mm[2],
                                r[2] * mm[1] + r[3] * mm[3],
                            ];
                            let rt = [
                                r[0] * pl.translation[0] + r[1] * pl.translation[1],
                                r[2] * pl.translation[0] + r[3] * pl.translation[1],
                            ];
                            let t = [xi * (rt[0] + g.t[0]), xi * (rt[1] + g.t[1])];
                            next.push((pl.child, Isometry { m: rm, t }));
                        }
                    }
                    cur = next;
                }
                cur.into_iter()
                    .map(|(proto, iso)| {
                        let vertices = self.rule.prototiles[proto].vertices.iter().map(|v| iso.apply(*v)).collect();
                        Tile { proto, iso, vertices }
                    })
                    .collect()
            }
            Engine::Penrose => {
                let exact = penrose_prototiles_exact();
                let mut cur = vec![ExactTriangle { kind: root, v: exact[root] }];
                for _ in 0..m {
                    cur = cur.iter().flat_map(penrose_split).collect();
                }
                cur.into_iter()
                    .map(|t| {
                        let vertices: Vec<[f64; 2]> = t.v.iter().map(|z| z.to_xy()).collect();
                        let iso = Isometry::from_triangles(&self.rule.prototiles[t.kind].vertices, &vertices);
                        Tile { proto: t.kind, iso, vertices }
                    })
                    .collect()
            }
        };
        let outline: Vec<[f64; 2]> = {
            let s = self.rule.xi().powi(m as i32);
            self.rule.prototiles[root].vertices.iter().map(|v| [s * v[0], s * v[1]]).collect()
        };
        Ok(Patch { root, generation: m, tiles, outline })
    }
}

/// One tile: `iso` applied to prototile `proto`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub proto: usize,
    pub iso: Isometry,
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub root: usize,
    pub generation: u32,
    pub tiles: Vec<Tile>,
    /// Boundary of the patch: the root prototile inflated by `ξ^m`.
    pub outline: Vec<[f64; 2]>,
}

impl Patch {
    pub fn area(&self) -> f64 {
        self.tiles.iter().map(|t| polygon_signed_area(&t.vertices).abs()).sum()
    }
}

/// A marked point per prototile, in prototile coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ChoiceFunction {
    Centroid,
    Points(Vec<[f64; 2]>),
}

impl ChoiceFunction {
    pub fn resolve(&self, rule: &SubstitutionRule) -> Result<Vec<[f64; 2]>> {
        let pts = match self {
            ChoiceFunction::Centroid => rule.prototiles.iter().map(Prototile::centroid).collect(),
            ChoiceFunction::Points(p) => p.clone(),
        };
        if pts.len() != rule.prototiles.len() {
            return Err(Error::InvalidParameter("one choice point per prototile is required".into()));
        }
        for (p, t) in pts.iter().zip(&rule.prototiles) {
            if !point_in_polygon(*p, &t.vertices) {
                return Err(Error::InvalidParameter(format!("choice point {p:?} lies outside prototile {}", t.id)));
            }
        }
        Ok(pts)
    }
}

/// What points a tiling contributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PointMode {
    Choice(ChoiceFunction),
    Vertices,
}

/// Deduplicates planar points within `1e-9`.
fn dedup_points(points: impl Iterator<Item = [f64; 2]>) -> Vec<[f64; 2]> {
    const CELL: f64 = 1e-6;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut out: Vec<[f64; 2]> = Vec::new();
    for p in points {
        let key = ((p[0] / CELL).floor() as i64, (p[1] / CELL).floor() as i64);
        let dup = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                grid.get(&(key.0 + dx, key.1 + dy)).is_some_and(|ids| {
                    ids.iter().any(|&i| (out[i][0] - p[0]).abs() <= 1e-9 && (out[i][1] - p[1]).abs() <= 1e-9)
                })
            })
        });
        if !dup {
            grid.entry(key).or_default().push(out.len());
            out.push(p);
        }
    }
    out
}

/// Points of a patch: one transported choice point per tile, or all tile
/// vertices without duplicates.
pub fn extract_points(rule: &SubstitutionRule, patch: &Patch, mode: &PointMode) -> Result<PointSet> {
    let pts: Vec<[f64; 2]> = match mode {
        PointMode::Choice(h) => {
            let h = h.resolve(rule)?;
            patch.tiles.iter().map(|t| t.iso.apply(h[t.proto])).collect()
        }
        PointMode::Vertices => dedup_points(patch.tiles.iter().flat_map(|t| t.vertices.iter().copied())),
    };
    Ok(PointSet::new(2, pts.into_iter().flatten().collect())?.with_meta("generator", "substitution"))
}

/// `δ = min_i D(h(T_i), ∂T_i)`.
pub fn delta_of_choice(rule: &SubstitutionRule, h: &ChoiceFunction) -> Result<f64> {
    let pts = h.resolve(rule)?;
    Ok(pts
        .iter()
        .zip(&rule.prototiles)
        .map(|(p, t)| distance_to_polygon_boundary(*p, &t.vertices))
        .fold(f64::INFINITY, f64::min))
}

/// Shift parameter `δ₁` for a choice with boundary points: half the smallest
/// distance from an interior choice point to its boundary, or from a boundary
/// choice point to the edges not containing it.
pub fn delta1_boundary(rule: &SubstitutionRule, h: &ChoiceFunction) -> Result<f64> {
    let pts = h.resolve(rule)?;
    let mut m = f64::INFINITY;
    for (p, t) in pts.iter().zip(&rule.prototiles) {
        let d = distance_to_polygon_boundary(*p, &t.vertices);
        if d > 1e-9 {
            m = m.min(d);
        } else {
            for (a, b) in t.edges() {
                let e = point_segment_distance_2d(*p, a, b);
                if e > 1e-9 {
                    m = m.min(e);
                }
            }
        }
    }
    Ok(0.5 * m)
}

/// Shift parameter `δ₁` for vertex sets: half the smallest distance from an
/// edge of a prototile to a vertex not on it.
pub fn delta1_vertices(rule: &SubstitutionRule) -> f64 {
    let mut m = f64::INFINITY;
    for t in &rule.prototiles {
        for (a, b) in t.edges() {
            for v in &t.vertices {
                let e = point_segment_distance_2d(*v, a, b);
                if e > 1e-9 {
                    m = m.min(e);
                }
            }
        }
    }
    0.5 * m
}

/// Segment length needed for a capsule of radius `r` in the plane:
/// `ℓ·r^{d−1}·V_{d−1} > 1`.
pub fn required_length(r: f64) -> f64 {
    1.0 / (r * unit_ball_volume(1))
}

/// Maximal straight runs of tile edges, in a deterministic order.
pub fn merged_edge_runs(patch: &Patch) -> Vec<([f64; 2], [f64; 2])> {
    let scale = patch.outline.iter().map(|v| v[0].abs().max(v[1].abs())).fold(1.0, f64::max);
    let mut segs: Vec<(f64, f64, f64, f64)> = Vec::new();
    for t in &patch.tiles {
        let n = t.vertices.len();
        for i in 0..n {
            let (a, b) = (t.vertices[i], t.vertices[(i + 1) % n]);
            let mut u = [b[0] - a[0], b[1] - a[1]];
            let len = (u[0] * u[0] + u[1] * u[1]).sqrt();
            if len == 0.0 {
                continue;
            }
            u = [u[0] / len, u[1] / len];
            if u[0] < -1e-12 || (u[0].abs() <= 1e-12 && u[1] < 0.0) {
                u = [-u[0], -u[1]];
            }
            let angle = u[1].atan2(u[0]);
            let off = -u[1] * a[0] + u[0] * a[1];
            let (s0, s1) = (u[0] * a[0] + u[1] * a[1], u[0] * b[0] + u[1] * b[1]);
            segs.push((angle, off, s0.min(s1), s0.max(s1)));
        }
    }
    segs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)));
    // Group collinear edges: angle within 1e-9 and offset within 1e-9·scale.
    let mut groups: Vec<Vec<(f64, f64, f64, f64)>> = Vec::new();
    for s in segs {
        let same = groups.last().is_some_and(|g| {
            let h = g[0];
            (s.0 - h.0).abs() <= 1e-9 && (s.1 - h.1).abs() <= 1e-9 * scale
        });
        if same {
            groups.last_mut().unwrap().push(s);
        } else {
            groups.push(vec![s]);
        }
    }
    let mut runs = Vec::new();
    for mut g in groups {
        g.sort_by(|x, y| x.2.total_cmp(&y.2));
        let (angle, off) = (g[0].0, g[0].1);
        let u = [angle.cos(), angle.sin()];
        let point = |s: f64| [s * u[0] - off * u[1], s * u[1] + off * u[0]];
        let (mut lo, mut hi) = (g[0].2, g[0].3);
        for s in &g[1..] {
            if s.2 <= hi + 1e-9 * scale {
                hi = hi.max(s.3);
            } else {
                runs.push((point(lo), point(hi)));
                lo = s.2;
                hi = s.3;
            }
        }
        runs.push((point(lo), point(hi)));
    }
    runs
}

/// Which proof case produced a witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessVariant {
    Interior,
    BoundaryShifted,
    Vertex,
}

/// An empty capsule of volume at least 1, with its certification record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CylinderWitness {
    pub system: String,
    pub variant: WitnessVariant,
    pub capsule: Capsule,
    /// `δ` (interior case) or `δ₁` (shifted cases).
    pub delta: f64,
    pub volume: f64,
    /// Smallest `m` with `ξ^m·(longest prototile edge)` long enough.
    pub inflation_power: u32,
    pub required_length: f64,
    pub patch_root: usize,
    pub patch_generation: u32,
    pub points_checked: usize,
    pub points_inside: usize,
    pub reverify_generation: u32,
    pub reverify_points_inside: usize,
}

/// Whether `cap` lies inside the simple polygon `outline` (with margin).
fn capsule_inside(cap: &Capsule, outline: &[[f64; 2]]) -> bool {
    let (a, b) = ([cap.a[0], cap.a[1]], [cap.b[0], cap.b[1]]);
    if !point_in_polygon(a, outline) || !point_in_polygon(b, outline) {
        return false;
    }
    let n = outline.len();
    (0..n).all(|i| segment_segment_distance_2d(a, b, outline[i], outline[(i + 1) % n]) > cap.radius + 1e-9)
}

/// Points of `y` inside `set`, by a full scan.
fn count_inside(y: &PointSet, cap: &Capsule) -> usize {
    (0..y.len()).into_par_iter().filter(|&i| cap.contains_unchecked(y.point(i))).count()
}

/// Builds and certifies an empty capsule of volume ≥ 1 for the Delone set or
/// vertex set of the tiling.
pub fn find_empty_cylinder(system: &SubstitutionSystem, mode: &PointMode, max_m: u32) -> Result<CylinderWitness> {
    let rule = &system.rule;
    let sm = substitution_matrix(rule);
    if !sm.primitive {
        return Err(Error::InvalidParameter("rule is not primitive".into()));
    }
    let (variant, delta, radius, shift) = match mode {
        PointMode::Choice(h) => {
            let d = delta_of_choice(rule, h)?;
            if d > 1e-9 {
                (WitnessVariant::Interior, d, 0.99 * d, 0.0)
            } else {
                let d1 = 0.99 * delta1_boundary(rule, h)?;
                (WitnessVariant::BoundaryShifted, d1, 0.99 * d1, d1)
            }
        }
        PointMode::Vertices => {
            let d1 = 0.99 * delta1_vertices(rule);
            (WitnessVariant::Vertex, d1, 0.99 * d1, d1)
        }
    };
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Degenerate("choice function gives no positive radius".into()));
    }
    let need = required_length(radius);
    let e_max = rule
        .prototiles
        .iter()
        .flat_map(|t| t.edges().map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()))
        .fold(0.0, f64::max);
    let xi = rule.xi();
    let mut m = 0u32;
    while e_max * xi.powi(m as i32) <= need {
        m += 1;
        if m > 64 {
            return Err(Error::Degenerate("inflation never reaches the needed length".into()));
        }
    }
    // Length with a small margin over the strict bound.
    let ell = need * (1.0 + 1e-6);
    for root in 0..rule.prototiles.len() {
        let Some(embed) = rule.children[root].iter().find(|pl| pl.child == root).cloned() else {
            continue;
        };
        for gen in m..=max_m.max(m) {
            let patch = match system.expand_patch(root, gen) {
                Ok(p) => p,
                Err(Error::GuardExceeded(_)) => break,
                Err(e) => return Err(e),
            };
            let points = extract_points(rule, &patch, mode)?;
            for (a, b) in merged_edge_runs(&patch) {
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                if len < ell {
                    continue;
                }
                let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
                let normal = [-u[1], u[0]];
                let sides: &[f64] = if shift > 0.0 { &[1.0, -1.0] } else { &[0.0] };
                let slack = len - ell;
                for &off in &[0.5, 0.0, 1.0] {
                    let s0 = off * slack;
                    for &side in sides {
                        let v = [side * shift * normal[0], side * shift * normal[1]];
                        let p0 = [a[0] + s0 * u[0] + v[0], a[1] + s0 * u[1] + v[1]];
                        let p1 = [p0[0] + ell * u[0], p0[1] + ell * u[1]];
                        let cap = Capsule::new(p0.to_vec(), p1.to_vec(), radius)?;
                        if !capsule_inside(&cap, &patch.outline) {
                            continue;
                        }
                        if points.count_in_region(&cap)? != 0 || count_inside(&points, &cap) != 0 {
                            continue;
                        }
                        let (inside_next, gen_next) = reverify(system, mode, root, gen, &embed, &cap)?;
                        if inside_next != 0 {
                            continue;
                        }
                        return Ok(CylinderWitness {
                            system: system.name.clone(),
                            variant,
                            volume: cap.volume(),
                            capsule: cap,
                            delta,
                            inflation_power: m,
                            required_length: need,
                            patch_root: root,
                            patch_generation: gen,
                            points_checked: points.len(),
                            points_inside: 0,
                            reverify_generation: gen_next,
                            reverify_points_inside: inside_next,
                        });
                    }
                }
            }
        }
    }
    Err(Error::VerificationFailed("no empty capsule found within the generation budget".into()))
}

/// Recounts the capsule inside the next-generation patch, where the current
/// patch sits as the child copy `x ↦ M·x + ξ^{gen+1}·t`.
fn reverify(
    system: &SubstitutionSystem,
    mode: &PointMode,
    root: usize,
    gen: u32,
    embed: &Placement,
    cap: &Capsule,
) -> Result<(usize, u32)> {
    let next = system.expand_patch(root, gen + 1)?;
    let pts = extract_points(&system.rule, &next, mode)?;
    let s = system.rule.xi().powi(gen as i32 + 1);
    let g = Isometry { m: embed.matrix, t: [s * embed.translation[0], s * embed.translation[1]] };
    let a = g.apply([cap.a[0], cap.a[1]]);
    let b = g.apply([cap.b[0], cap.b[1]]);
    let moved = Capsule::new(a.to_vec(), b.to_vec(), cap.radius)?;
    Ok((count_inside(&pts, &moved), gen + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrices() {
        let p = substitution_matrix(&SubstitutionSystem::penrose_robinson().rule);
        assert_eq!(p.a, vec![vec![2, 1], vec![1, 1]]);
        assert_eq!((p.primitive, p.power), (true, Some(1)));
        let c = substitution_matrix(&SubstitutionSystem::chair().rule);
        assert_eq!(c.a, vec![vec![4]]);
        assert_eq!(c.power, Some(1));
    }

    #[test]
    fn identity_like_rule_is_not_primitive() {
        let sq = |id| Prototile { id, vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        let quads = |child| {
            [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]]
                .iter()
                .map(|t| Placement { matrix: [1.0, 0.0, 0.0, 1.0], translation: *t, child })
                .collect::<Vec<_>>()
        };
        let rule = SubstitutionRule::new(0.5, vec![sq(0), sq(1)], vec![quads(0), quads(1)]).unwrap();
        let m = substitution_matrix(&rule);
        assert_eq!(m.a, vec![vec![4, 0], vec![0, 4]]);
        assert!(!m.primitive);
    }

    #[test]
    fn invalid_rules_are_rejected() {
        let sq = Prototile { id: 0, vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        let three: Vec<Placement> = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]]
            .iter()
            .map(|t| Placement { matrix: [1.0, 0.0, 0.0, 1.0], translation: *t, child: 0 })
            .collect();
        assert!(SubstitutionRule::new(0.5, vec![sq.clone()], vec![three.clone()]).is_err());
        let mut overlap = three.clone();
        overlap.push(Placement { matrix: [1.0, 0.0, 0.0, 1.0], translation: [0.25, 0.25], child: 0 });
        assert!(SubstitutionRule::new(0.5, vec![sq], vec![overlap]).is_err());
    }

    #[test]
    fn cyclotomic_arithmetic() {
        let phi = Cyclo5::PHI.to_xy();
        assert!((phi[0] - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12 && phi[1].abs() < 1e-12);
        assert_eq!(Cyclo5::PHI * Cyclo5::INV_PHI, Cyclo5::ONE);
        assert_eq!(Cyclo5::zeta_pow(5), Cyclo5::ONE);
        let z = Cyclo5::zeta_pow(1);
        let w = Cyclo5([3, -1, 4, 2]);
        let p = (z * w).to_xy();
        let (zx, wx) = (z.to_xy(), w.to_xy());
        assert!((p[0] - (zx[0] * wx[0] - zx[1] * wx[1])).abs() < 1e-12);
        assert!((p[1] - (zx[0] * wx[1] + zx[1] * wx[0])).abs() < 1e-12);
    }

    #[test]
    fn tile_counts_match_matrix_powers() {
        for sys in [SubstitutionSystem::chair(), SubstitutionSystem::penrose_robinson()] {
            for root in 0..sys.rule.prototiles.len() {
                for m in 0..=6 {
                    let p = sys.expand_patch(root, m).unwrap();
                    assert_eq!(p.tiles.len() as u128, predicted_tile_count(&sys.rule, root, m));
                    let expect = sys.rule.xi().powi(2 * m as i32) * sys.rule.prototiles[root].area();
                    assert!((p.area() - expect).abs() <= 1e-9 * expect);
                }
            }
        }
        assert_eq!(SubstitutionSystem::chair().expand_patch(0, 3).unwrap().tiles.len(), 64);
        assert_eq!(SubstitutionSystem::penrose_robinson().expand_patch(0, 5).unwrap().tiles.len(), 144);
    }

    #[test]
    fn tiles_are_congruent_to_prototiles() {
        let sys = SubstitutionSystem::penrose_robinson();
        let p = sys.expand_patch(1, 6).unwrap();
        for t in &p.tiles {
            let m = &t.iso.m;
            assert!(is_orthogonal(m));
            let proto = &sys.rule.prototiles[t.proto];
            for (v, w) in proto.vertices.iter().zip(&t.vertices) {
                let q = t.iso.apply(*v);
                assert!((q[0] - w[0]).abs() < 1e-9 && (q[1] - w[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn patch_guard() {
        assert!(matches!(SubstitutionSystem::chair().expand_patch(0, 11), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn point_extraction() {
        let sys = SubstitutionSystem::chair();
        let rule = &sys.rule;
        let one = sys.expand_patch(0, 0).unwrap();
        let c = extract_points(rule, &one, &PointMode::Choice(ChoiceFunction::Centroid)).unwrap();
        assert_eq!(c.coords().len(), 2);
        assert!((c.point(0)[0] - 5.0 / 6.0).abs() < 1e-12);
        let four = sys.expand_patch(0, 1).unwrap();
        let c = extract_points(rule, &four, &PointMode::Choice(ChoiceFunction::Centroid)).unwrap();
        assert_eq!(c.len(), 4);
        for (t, p) in four.tiles.iter().zip(c.iter()) {
            assert!(point_in_polygon([p[0], p[1]], &t.vertices));
        }
        let v = extract_points(rule, &four, &PointMode::Vertices).unwrap();
        assert!(v.len() < 24);
        let bad = PointMode::Choice(ChoiceFunction::Points(vec![[1.5, 1.5]]));
        assert!(extract_points(rule, &four, &bad).is_err());
    }

    #[test]
    fn shared_vertices_are_counted_once() {
        let sq = |id| Prototile { id, vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        let quads: Vec<Placement> = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]]
            .iter()
            .map(|t| Placement { matrix: [1.0, 0.0, 0.0, 1.0], translation: *t, child: 0 })
            .collect();
        let rule = SubstitutionRule::new(0.5, vec![sq(0)], vec![quads]).unwrap();
        let patch = Patch {
            root: 0,
            generation: 0,
            tiles: vec![
                Tile { proto: 0, iso: Isometry::IDENTITY, vertices: sq(0).vertices },
                Tile {
                    proto: 0,
                    iso: Isometry { m: [1.0, 0.0, 0.0, 1.0], t: [1.0, 0.0] },
                    vertices: vec![[1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0]],
                },
            ],
            outline: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]],
        };
        assert_eq!(extract_points(&rule, &patch, &PointMode::Vertices).unwrap().len(), 6);
        assert_eq!(delta_of_choice(&rule, &ChoiceFunction::Centroid).unwrap(), 0.5);
    }

    #[test]
    fn delta_examples() {
        let chair = SubstitutionSystem::chair();
        let d = delta_of_choice(&chair.rule, &ChoiceFunction::Centroid).unwrap();
        assert!((d - 2f64.sqrt() / 6.0).abs() < 1e-12);
        let v = delta_of_choice(&chair.rule, &ChoiceFunction::Points(vec![[0.0, 0.0]])).unwrap();
        assert_eq!(v, 0.0);
        assert!((required_length(0.1) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn choice_points_are_separated() {
        let sys = SubstitutionSystem::penrose_robinson();
        let p = sys.expand_patch(0, 7).unwrap();
        let y = extract_points(&sys.rule, &p, &PointMode::Choice(ChoiceFunction::Centroid)).unwrap();
        assert_eq!(y.len(), p.tiles.len());
        let mut min = f64::INFINITY;
        for i in (0..y.len()).step_by(7) {
            for j in 0..y.len() {
                if i != j {
                    let d = ((y.point(i)[0] - y.point(j)[0]).powi(2) + (y.point(i)[1] - y.point(j)[1]).powi(2)).sqrt();
                    min = min.min(d);
                }
            }
        }
        assert!(min > 0.1);
    }

    #[test]
    fn rule_json_round_trip() {
        let sys = SubstitutionSystem::penrose_robinson();
        let text = serde_json::to_string(&sys.rule.to_document()).unwrap();
        let back = SubstitutionRule::from_json(&text).unwrap();
        assert_eq!(substitution_matrix(&back).a, vec![vec![2, 1], vec![1, 1]]);
        assert!(SubstitutionRule::from_json("{\"zeta\": 2}").is_err());
    }

    fn check(w: &CylinderWitness) {
        assert!(w.volume >= 1.0, "volume {}", w.volume);
        assert_eq!(w.points_inside, 0);
        assert_eq!(w.reverify_points_inside, 0);
        assert_eq!(w.reverify_generation, w.patch_generation + 1);
    }

    #[test]
    fn chair_witnesses() {
        let sys = SubstitutionSystem::chair();
        let w = find_empty_cylinder(&sys, &PointMode::Choice(ChoiceFunction::Centroid), 8).unwrap();
        assert_eq!(w.variant, WitnessVariant::Interior);
        check(&w);
        let b = find_empty_cylinder(&sys, &PointMode::Choice(ChoiceFunction::Points(vec![[1.0, 0.0]])), 8).unwrap();
        assert_eq!(b.variant, WitnessVariant::BoundaryShifted);
        check(&b);
        let v = find_empty_cylinder(&sys, &PointMode::Vertices, 8).unwrap();
        assert_eq!(v.variant, WitnessVariant::Vertex);
        check(&v);
    }

    #[test]
    fn penrose_witness() {
        let sys = SubstitutionSystem::penrose_robinson();
        let w = find_empty_cylinder(&sys, &PointMode::Choice(ChoiceFunction::Centroid), 14).unwrap();
        check(&w);
    }
}
