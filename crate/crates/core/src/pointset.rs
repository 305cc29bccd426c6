//! Finite point sets with a uniform-grid index, exact region counting,
//! segment-distance queries, rescaling, rational snapping, and DPS1 I/O.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde_json::Value;

use crate::error::check_dim;
use crate::geom::{point_segment_distance, AffineMap, Capsule, ConvexPolygon, Region, TOL};
use crate::{Error, Result};

/// Uniform-grid bucket index in compressed row storage.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    pub cell_size: f64,
    origin: Vec<f64>,
    dims: Vec<usize>,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl SpatialIndex {
    fn build(dim: usize, coords: &[f64], requested: Option<f64>) -> Self {
        let n = coords.len() / dim.max(1);
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks_exact(dim) {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if n == 0 {
            lo = vec![0.0; dim];
            hi = vec![0.0; dim];
        }
        let extent: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
        let vol: f64 = extent.iter().map(|e| e.max(1e-12)).product();
        let spacing = (vol / n.max(1) as f64).powf(1.0 / dim as f64);
        let mut cell = requested.unwrap_or(spacing).max(spacing * 1e-3);
        if !(cell > 0.0 && cell.is_finite()) {
            cell = 1.0;
        }
        // Bound the cell count by a small multiple of the point count.
        let limit = 4.0 * n as f64 + 16.0;
        loop {
            let cells: f64 = extent.iter().map(|e| (e / cell).floor() + 1.0).product();
            if cells <= limit {
                break;
            }
            cell *= 1.25;
        }
        let dims: Vec<usize> = extent.iter().map(|e| (e / cell).floor() as usize + 1).collect();
        let ncell: usize = dims.iter().product();
        let mut index = SpatialIndex { cell_size: cell, origin: lo, dims, offsets: Vec::new(), items: Vec::new() };
        let cell_of: Vec<u32> = coords.chunks_exact(dim).map(|p| index.cell_id(p) as u32).collect();
        let mut counts = vec![0u32; ncell + 1];
        for &c in &cell_of {
            counts[c as usize + 1] += 1;
        }
        for i in 0..ncell {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; n];
        for (i, &c) in cell_of.iter().enumerate() {
            items[fill[c as usize] as usize] = i as u32;
            fill[c as usize] += 1;
        }
        index.offsets = counts;
        index.items = items;
        index
    }

    fn axis_cell(&self, k: usize, x: f64) -> usize {
        let c = ((x - self.origin[k]) / self.cell_size).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[k] - 1)
        }
    }

    fn cell_id(&self, p: &[f64]) -> usize {
        let mut id = 0;
        for k in (0..self.dims.len()).rev() {
            id = id * self.dims[k] + self.axis_cell(k, p[k]);
        }
        id
    }

    fn cell(&self, id: usize) -> &[u32] {
        &self.items[self.offsets[id] as usize..self.offsets[id + 1] as usize]
    }

    /// Number of occupied buckets and total bucket entries.
    pub fn stats(&self) -> (usize, usize) {
        let occupied = (0..self.offsets.len() - 1).filter(|&i| !self.cell(i).is_empty()).count();
        (occupied, self.items.len())
    }

    /// Visits every point index whose cell meets the box `[lo, hi]`.
    fn for_each_in_box(&self, lo: &[f64], hi: &[f64], mut f: impl FnMut(usize) -> ControlFlow<()>) -> ControlFlow<()> {
        let d = self.dims.len();
        let mut a = vec![0usize; d];
        let mut b = vec![0usize; d];
        for k in 0..d {
            if hi[k] < self.origin[k] - self.cell_size || lo[k] > self.origin[k] + self.cell_size * self.dims[k] as f64
            {
                return ControlFlow::Continue(());
            }
            a[k] = self.axis_cell(k, lo[k]);
            b[k] = self.axis_cell(k, hi[k]);
        }
        let mut cur = a.clone();
        loop {
            let mut id = 0;
            for k in (0..d).rev() {
                id = id * self.dims[k] + cur[k];
            }
            for &i in self.cell(id) {
                f(i as usize)?;
            }
            let mut k = 0;
            loop {
                if k == d {
                    return ControlFlow::Continue(());
                }
                if cur[k] < b[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = a[k];
                k += 1;
            }
        }
    }

    /// Visits every point index whose cell meets the planar convex polygon.
    fn for_each_in_polygon(
        &self,
        poly: &ConvexPolygon,
        mut f: impl FnMut(usize) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let ys = poly.vertices.iter().map(|v| v[1]);
        let ymin = ys.clone().fold(f64::INFINITY, f64::min) - TOL;
        let ymax = ys.fold(f64::NEG_INFINITY, f64::max) + TOL;
        let (r0, r1) = (self.axis_cell(1, ymin), self.axis_cell(1, ymax));
        for row in r0..=r1 {
            let band_lo = if row == 0 { f64::NEG_INFINITY } else { self.origin[1] + row as f64 * self.cell_size };
            let band_hi = if row + 1 == self.dims[1] {
                f64::INFINITY
            } else {
                self.origin[1] + (row + 1) as f64 * self.cell_size
            };
            let (xmin, xmax) = band_x_extent(poly, band_lo - TOL, band_hi + TOL);
            if xmin > xmax {
                continue;
            }
            let (c0, c1) = (self.axis_cell(0, xmin - TOL), self.axis_cell(0, xmax + TOL));
            let base = row * self.dims[0];
            let (s, e) = (self.offsets[base + c0] as usize, self.offsets[base + c1 + 1] as usize);
            for &i in &self.items[s..e] {
                f(i as usize)?;
            }
        }
        ControlFlow::Continue(())
    }
}

/// x-extent of a convex polygon restricted to the band `lo ≤ y ≤ hi`.
fn band_x_extent(poly: &ConvexPolygon, lo: f64, hi: f64) -> (f64, f64) {
    let v = &poly.vertices;
    let n = v.len();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut take = |x: f64| {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
    };
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if a[1] >= lo && a[1] <= hi {
            take(a[0]);
        }
        for y in [lo, hi] {
            if (a[1] - y) * (b[1] - y) < 0.0 {
                take(a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]));
            }
        }
    }
    (xmin, xmax)
}

/// A finite set of points in `ℝ^dim` with free-form metadata.
#[derive(Debug)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    pub meta: BTreeMap<String, Value>,
    cell_override: Option<f64>,
    index: OnceLock<SpatialIndex>,
}

impl Clone for PointSet {
    fn clone(&self) -> Self {
        PointSet {
            dim: self.dim,
            coords: self.coords.clone(),
            meta: self.meta.clone(),
            cell_override: self.cell_override,
            index: OnceLock::new(),
        }
    }
}

impl PartialEq for PointSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coords == other.coords && self.meta == other.meta
    }
}

impl PointSet {
    /// Builds a set from flat row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: coords.len() % dim });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(PointSet { dim, coords, meta: BTreeMap::new(), cell_override: None, index: OnceLock::new() })
    }

    pub fn empty(dim: usize) -> Self {
        PointSet::new(dim, Vec::new()).expect("dim > 0")
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            check_dim(dim, p.len())?;
            coords.extend_from_slice(p);
        }
        PointSet::new(dim, coords)
    }

    /// Integer lattice points of `ℤ^dim` in the cube `[-t, t]^dim`.
    pub fn integer_grid(dim: usize, t: i64) -> Self {
        let side = (2 * t + 1) as usize;
        let total = side.pow(dim as u32);
        let mut coords = Vec::with_capacity(total * dim);
        for idx in 0..total {
            let mut r = idx;
            for _ in 0..dim {
                coords.push((r % side) as f64 - t as f64);
                r /= side;
            }
        }
        PointSet::new(dim, coords).expect("finite grid")
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    /// Overrides the index cell size (the index is rebuilt lazily).
    pub fn with_cell_size(mut self, cell: f64) -> Self {
        self.cell_override = Some(cell);
        self.index = OnceLock::new();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn index(&self) -> &SpatialIndex {
        self.index.get_or_init(|| SpatialIndex::build(self.dim, &self.coords, self.cell_override))
    }

    /// Visits the index of every point inside the closed region.
    pub fn for_each_in_region(&self, region: &dyn Region, mut f: impl FnMut(usize)) -> Result<()> {
        self.try_for_each_in_region(region, |i| {
            f(i);
            ControlFlow::Continue(())
        })
    }

    /// Like `for_each_in_region`, stopping when `f` breaks.
    pub fn try_for_each_in_region(
        &self,
        region: &dyn Region,
        mut f: impl FnMut(usize) -> ControlFlow<()>,
    ) -> Result<()> {
        check_dim(self.dim, region.dim())?;
        if self.is_empty() {
            return Ok(());
        }
        let idx = self.index();
        let mut visit = |i: usize| {
            if region.contains_unchecked(self.point(i)) {
                f(i)
            } else {
                ControlFlow::Continue(())
            }
        };
        let _ = match region.covering_polygon_2d().filter(|_| self.dim == 2) {
            Some(poly) => idx.for_each_in_polygon(&poly, &mut visit),
            None => {
                let (lo, hi) = region.bounds();
                let lo: Vec<f64> = lo.iter().map(|x| x - TOL).collect();
                let hi: Vec<f64> = hi.iter().map(|x| x + TOL).collect();
                idx.for_each_in_box(&lo, &hi, &mut visit)
            }
        };
        Ok(())
    }

    /// Exact number of points in the closed region.
    pub fn count_in_region(&self, region: &dyn Region) -> Result<usize> {
        let mut n = 0;
        self.for_each_in_region(region, |_| n += 1)?;
        Ok(n)
    }

    /// Indices of points in the closed region, in storage order.
    pub fn indices_in_region(&self, region: &dyn Region) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.for_each_in_region(region, |i| out.push(i))?;
        out.sort_unstable();
        Ok(out)
    }

    /// The points inside the region, as a new set with the same metadata.
    pub fn restrict(&self, region: &dyn Region) -> Result<PointSet> {
        let idx = self.indices_in_region(region)?;
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for i in idx {
            coords.extend_from_slice(self.point(i));
        }
        let mut out = PointSet::new(self.dim, coords)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Keeps the points for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(&[f64]) -> bool) -> PointSet {
        let coords: Vec<f64> = self.iter().filter(|p| keep(p)).flatten().copied().collect();
        let mut out = PointSet::new(self.dim, coords).expect("subset of valid set");
        out.meta = self.meta.clone();
        out
    }

    /// Minimum Euclidean distance from the set to the closed segment `[a, b]`,
    /// using a capsule search of doubling radius.
    pub fn distance_to_segment(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dim(self.dim, a.len())?;
        check_dim(self.dim, b.len())?;
        if self.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let idx = self.index();
        let mut r = idx.cell_size;
        let mut far_end = b.to_vec();
        if a == b {
            // A degenerate segment behaves like a point query.
            far_end[0] += 1e-12;
        }
        loop {
            let cap = Capsule::new(a.to_vec(), far_end.clone(), r).expect("valid capsule");
            let mut best = f64::INFINITY;
            let mut visit = |i: usize| {
                best = best.min(point_segment_distance(self.point(i), a, b));
                ControlFlow::Continue(())
            };
            let _ = match cap.covering_polygon_2d().filter(|_| self.dim == 2) {
                Some(poly) => idx.for_each_in_polygon(&poly, &mut visit),
                None => {
                    let (lo, hi) = cap.bounds();
                    idx.for_each_in_box(&lo, &hi, &mut visit)
                }
            };
            if best <= r {
                return Ok(best);
            }
            r *= 2.0;
        }
    }

    /// Replaces every point by the vertices of its enclosing cell of the grid
    /// `(num/den)·ℤ^d`, deduplicated by integer multiple.
    pub fn snap_to_rational_grid(&self, num: u64, den: u64) -> Result<PointSet> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter("mesh must be a positive rational".into()));
        }
        let d = self.dim;
        let mut seen: BTreeSet<Vec<i64>> = BTreeSet::new();
        let mut order: Vec<Vec<i64>> = Vec::new();
        for p in self.iter() {
            let mut lo = vec![0i64; d];
            let mut hi = vec![0i64; d];
            for k in 0..d {
                let q = p[k] * den as f64 / num as f64;
                let r = q.round();
                // Points within rounding error of a grid line are on it.
                if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
                    lo[k] = r as i64;
                    hi[k] = r as i64;
                } else {
                    lo[k] = q.floor() as i64;
                    hi[k] = q.ceil() as i64;
                }
            }
            for mask in 0..1usize << d {
                let v: Vec<i64> = (0..d).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect();
                if seen.insert(v.clone()) {
                    order.push(v);
                }
            }
        }
        let coords: Vec<f64> = order.iter().flatten().map(|&m| m as f64 * num as f64 / den as f64).collect();
        let mut out = PointSet::new(d, coords)?;
        out.meta = self.meta.clone();
        out.meta.insert("snap_mesh".into(), Value::from(format!("{num}/{den}")));
        Ok(out)
    }

    /// Integer multiples behind each coordinate of a snapped set.
    pub fn grid_multiples(&self, num: u64, den: u64) -> Vec<i64> {
        self.coords.iter().map(|x| (x * den as f64 / num as f64).round() as i64).collect()
    }

    /// Multiplies all coordinates by `factor`; meta `scale` is cumulative.
    pub fn rescale(&self, factor: f64) -> Result<PointSet> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter("scale factor must be positive".into()));
        }
        let mut out = PointSet::new(self.dim, self.coords.iter().map(|x| x * factor).collect())?;
        out.meta = self.meta.clone();
        let prev = self.meta.get("scale").and_then(Value::as_f64).unwrap_or(1.0);
        out.meta.insert("scale".into(), Value::from(prev * factor));
        Ok(out)
    }

    /// Image of the set under an affine map.
    pub fn apply_affine(&self, m: &AffineMap) -> Result<PointSet> {
        check_dim(self.dim, m.dim())?;
        let coords: Vec<f64> = self.iter().flat_map(|p| m.apply_unchecked(p)).collect();
        let mut out = PointSet::new(self.dim, coords)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Concatenation of two sets of equal dimension.
    pub fn union(&self, other: &PointSet) -> Result<PointSet> {
        check_dim(self.dim, other.dim)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut out = PointSet::new(self.dim, coords)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// DPS1 encoding of the coordinates.
    pub fn to_dps_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 8 * self.coords.len());
        buf.extend_from_slice(b"DPS1");
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for c in &self.coords {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        buf
    }

    pub fn from_dps_bytes(bytes: &[u8]) -> Result<PointSet> {
        if bytes.len() < 16 || &bytes[..4] != b"DPS1" {
            return Err(Error::Format("missing DPS1 header".into()));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let need = count
            .checked_mul(dim)
            .and_then(|x| x.checked_mul(8))
            .ok_or_else(|| Error::Format("size overflow".into()))?;
        if bytes.len() - 16 != need {
            return Err(Error::Format(format!("expected {need} payload bytes, found {}", bytes.len() - 16)));
        }
        let coords: Vec<f64> = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        PointSet::new(dim, coords).map_err(|e| Error::Format(e.to_string()))
    }

    /// Writes `path` in DPS1 format and `path.meta.json` with the metadata.
    pub fn write_dps(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_dps_bytes())?;
        w.flush()?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(meta_path(path), meta + "\n")?;
        Ok(())
    }

    /// Reads a DPS1 file and its metadata sidecar, if present.
    pub fn read_dps(path: &Path) -> Result<PointSet> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        let mut ps = PointSet::from_dps_bytes(&bytes)?;
        let mp = meta_path(path);
        if mp.exists() {
            let text = std::fs::read_to_string(mp)?;
            ps.meta = serde_json::from_str(&text)?;
        }
        Ok(ps)
    }
}

/// Sidecar path `<file>.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}
