//! Small dense linear algebra on row-major `Vec<f64>` matrices.

use nalgebra::DMatrix;

use crate::{Error, Result};

pub(crate) fn to_dmatrix(m: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, m)
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * m.ncols());
    for i in 0..n {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn det(m: &[f64], n: usize) -> f64 {
    match n {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => to_dmatrix(m, n).determinant(),
    }
}

pub fn inverse(m: &[f64], n: usize) -> Result<Vec<f64>> {
    to_dmatrix(m, n)
        .try_inverse()
        .map(|inv| from_dmatrix(&inv))
        .ok_or_else(|| Error::Degenerate("singular matrix".into()))
}

pub fn mat_vec(m: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    let cols = v.len();
    (0..n).map(|i| (0..cols).map(|j| m[i * cols + j] * v[j]).sum()).collect()
}

/// `aᵀ·v` for a square row-major `a`.
pub fn mat_t_vec(m: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    (0..n).map(|j| (0..n).map(|i| m[i * n + j] * v[i]).sum()).collect()
}

pub fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub fn transpose(m: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = m[i * n + j];
        }
    }
    out
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i * n + i] = 1.0;
    }
    out
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest singular value.
pub fn spectral_norm(m: &[f64], n: usize) -> f64 {
    to_dmatrix(m, n).singular_values().iter().cloned().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = vec![2.0, 1.0, 0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0];
        let inv = inverse(&m, 3).unwrap();
        let p = mat_mul(&m, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i * 3 + j] - e).abs() < 1e-12);
            }
        }
        assert!((det(&m, 3) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn singular_is_error() {
        assert!(inverse(&[1.0, 2.0, 2.0, 4.0], 2).is_err());
    }
}
