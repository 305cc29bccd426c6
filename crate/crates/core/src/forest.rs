//! Dense-forest visibility: sampled estimates of `ε(T)`, the worst distance
//! from a point set to a segment of length `T`, and power-law fits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::AxisBox;
use crate::pointset::PointSet;
use crate::rng::substream;
use crate::{Error, Result};

/// Stratified start positions per axis and directions of the planar sweep.
pub const SWEEP_GRID: usize = 10;
pub const SWEEP_DIRECTIONS: usize = 360;

/// `ε̂(T)` per `T`: a maximum over samples, hence a lower bound on `ε(T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityProfile {
    pub t_values: Vec<f64>,
    pub eps_estimates: Vec<f64>,
    pub samples_per_t: usize,
    /// Deterministic sweep segments evaluated in addition to the samples.
    pub sweep_segments: usize,
    pub window: AxisBox,
    pub seed: u64,
}

/// Start points and unit directions: `samples` random pairs (nested in the
/// sample count), then for `d = 2` the stratified sweep.
fn segments(dim: usize, samples: usize, window: &AxisBox, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|i| {
            let mut rng = substream(seed, "forest", i as u64);
            let x: Vec<f64> = (0..dim).map(|k| rng.random_range(window.lo[k]..=window.hi[k])).collect();
            let v = loop {
                let g: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
                let n = g.iter().map(|a| a * a).sum::<f64>().sqrt();
                if n > 1e-9 {
                    break g.iter().map(|a| a / n).collect::<Vec<f64>>();
                }
            };
            (x, v)
        })
        .collect();
    if dim == 2 {
        for i in 0..SWEEP_GRID {
            for j in 0..SWEEP_GRID {
                let x = vec![
                    window.lo[0] + (i as f64 + 0.5) / SWEEP_GRID as f64 * window.side(0),
                    window.lo[1] + (j as f64 + 0.5) / SWEEP_GRID as f64 * window.side(1),
                ];
                for k in 0..SWEEP_DIRECTIONS {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / SWEEP_DIRECTIONS as f64;
                    out.push((x.clone(), vec![a.cos(), a.sin()]));
                }
            }
        }
    }
    out
}

fn normal(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// `ε̂(T) = max` over segments `[x, x + T·v]` of the distance to `y`, on a
/// common sample set for every `T`. Each segment's distances are taken as a
/// running minimum over increasing `T`, so `ε̂` is non-increasing in `T`.
pub fn epsilon_of_t(
    y: &PointSet,
    t_values: &[f64],
    samples: usize,
    window: &AxisBox,
    seed: u64,
) -> Result<VisibilityProfile> {
    let d = y.dim();
    if y.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if window.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: window.dim() });
    }
    if t_values.is_empty() || t_values.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter("T values must be positive".into()));
    }
    let mut order: Vec<usize> = (0..t_values.len()).collect();
    order.sort_by(|&a, &b| t_values[a].total_cmp(&t_values[b]));
    let tmax = t_values[order[order.len() - 1]];
    let (lo, hi) = extent(y);
    for k in 0..d {
        if window.lo[k] - tmax < lo[k] || window.hi[k] + tmax > hi[k] {
            return Err(Error::InvalidParameter(format!(
                "window must sit at least {tmax} inside the point set extent on axis {k}"
            )));
        }
    }
    let _ = y.index();
    let segs = segments(d, samples, window, seed);
    let per_segment: Vec<Vec<f64>> = segs
        .par_iter()
        .map(|(x, v)| {
            let mut out = vec![0.0; t_values.len()];
            let mut running = f64::INFINITY;
            for &i in &order {
                let b: Vec<f64> = x.iter().zip(v).map(|(a, u)| a + t_values[i] * u).collect();
                let dist = y.distance_to_segment(x, &b).expect("dimensions checked");
                running = running.min(dist);
                out[i] = running;
            }
            out
        })
        .collect();
    let eps_estimates = (0..t_values.len()).map(|i| per_segment.iter().map(|r| r[i]).fold(0.0, f64::max)).collect();
    Ok(VisibilityProfile {
        t_values: t_values.to_vec(),
        eps_estimates,
        samples_per_t: samples,
        sweep_segments: segs.len() - samples,
        window: window.clone(),
        seed,
    })
}

fn extent(y: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let d = y.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in y.iter() {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Least-squares slope of `log ε̂` against `log T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub r_squared: f64,
}

pub fn exponent_fit(profile: &VisibilityProfile) -> Result<ExponentFit> {
    let n = profile.t_values.len();
    if n < 4 || profile.eps_estimates.len() != n {
        return Err(Error::InvalidParameter("exponent fit needs at least 4 T values".into()));
    }
    if profile.eps_estimates.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Degenerate("zero visibility estimate".into()));
    }
    let xs: Vec<f64> = profile.t_values.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = profile.eps_estimates.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("T values must differ".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let r_squared = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ExponentFit { slope, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(t: &[f64], e: &[f64]) -> VisibilityProfile {
        VisibilityProfile {
            t_values: t.to_vec(),
            eps_estimates: e.to_vec(),
            samples_per_t: 0,
            sweep_segments: 0,
            window: AxisBox::cube(2, 1.0).unwrap(),
            seed: 0,
        }
    }

    #[test]
    fn exact_power_law() {
        let t = [1.0, 2.0, 4.0, 8.0, 16.0];
        let e: Vec<f64> = t.iter().map(|x| 1.0 / x).collect();
        let f = exponent_fit(&profile(&t, &e)).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let flat = exponent_fit(&profile(&t, &[0.3; 5])).unwrap();
        assert!(flat.slope.abs() < 1e-12);
        assert!(exponent_fit(&profile(&t, &[0.3, 0.2, 0.0, 0.1, 0.1])).is_err());
        assert!(exponent_fit(&profile(&t[..3], &e[..3])).is_err());
    }

    fn fine_grid(mesh: f64, half: f64) -> PointSet {
        let k = (half / mesh).round() as i64;
        let coords: Vec<f64> =
            (-k..=k).flat_map(|i| (-k..=k).flat_map(move |j| [i as f64 * mesh, j as f64 * mesh])).collect();
        PointSet::new(2, coords).unwrap()
    }

    #[test]
    fn dense_grid_bound() {
        let y = fine_grid(0.01, 3.0);
        let w = AxisBox::cube(2, 0.5).unwrap();
        let p = epsilon_of_t(&y, &[0.5, 1.0, 2.0], 500, &w, 1).unwrap();
        for e in &p.eps_estimates {
            assert!(*e <= 0.01 * 2f64.sqrt() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn monotone_and_nested() {
        let y = fine_grid(1.0, 40.0);
        let w = AxisBox::new(vec![0.0, 0.0], vec![3.0, 3.0]).unwrap();
        let ts = [2.0, 5.0, 10.0, 20.0];
        let a = epsilon_of_t(&y, &ts, 200, &w, 4).unwrap();
        let b = epsilon_of_t(&y, &ts, 400, &w, 4).unwrap();
        for i in 0..ts.len() {
            assert!(b.eps_estimates[i] >= a.eps_estimates[i]);
            if i > 0 {
                assert!(a.eps_estimates[i] <= a.eps_estimates[i - 1]);
            }
        }
        assert_eq!(a.sweep_segments, SWEEP_GRID * SWEEP_GRID * SWEEP_DIRECTIONS);
    }

    #[test]
    fn window_near_edge_is_rejected() {
        let y = fine_grid(1.0, 10.0);
        let w = AxisBox::cube(2, 1.0).unwrap();
        assert!(epsilon_of_t(&y, &[20.0], 10, &w, 0).is_err());
        assert!(epsilon_of_t(&y, &[5.0], 10, &w, 0).is_ok());
    }
}
