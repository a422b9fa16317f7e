//! Pointwise `N x N` matrix fields stored as `N^2` row-major components
//! (component `i N + j` is entry `(i, j)`), the layout produced by
//! [`crate::spectral::gradient`] for the Jacobian `D f`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};

pub(crate) type Mat = [f64; 9];

#[inline]
pub(crate) fn load(f: &SpectralField, dim: usize, flat: usize) -> Mat {
    let n = f.grid().npoints();
    let v = f.values();
    let mut m = [0.0; 9];
    for c in 0..dim * dim {
        m[c] = v[c * n + flat];
    }
    m
}

#[inline]
pub(crate) fn mul(a: &Mat, b: &Mat, dim: usize) -> Mat {
    let mut m = [0.0; 9];
    for i in 0..dim {
        for j in 0..dim {
            let mut s = 0.0;
            for k in 0..dim {
                s += a[i * dim + k] * b[k * dim + j];
            }
            m[i * dim + j] = s;
        }
    }
    m
}

#[inline]
pub(crate) fn transpose(a: &Mat, dim: usize) -> Mat {
    let mut m = [0.0; 9];
    for i in 0..dim {
        for j in 0..dim {
            m[j * dim + i] = a[i * dim + j];
        }
    }
    m
}

#[inline]
pub(crate) fn identity(dim: usize) -> Mat {
    let mut m = [0.0; 9];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}

#[inline]
pub(crate) fn add(a: &Mat, b: &Mat, s: f64) -> Mat {
    let mut m = [0.0; 9];
    for i in 0..9 {
        m[i] = a[i] + s * b[i];
    }
    m
}

/// Induced infinity norm (maximum absolute row sum).
#[inline]
pub(crate) fn row_sum_norm(a: &Mat, dim: usize) -> f64 {
    (0..dim).map(|i| (0..dim).map(|j| a[i * dim + j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[inline]
pub(crate) fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn det(a: &Mat, dim: usize) -> f64 {
    match dim {
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
    }
}

/// Inverse by the adjugate formula.
pub(crate) fn inverse(a: &Mat, dim: usize) -> Option<Mat> {
    let d = det(a, dim);
    if d.abs() < 1e-300 || !d.is_finite() {
        return None;
    }
    let mut m = [0.0; 9];
    match dim {
        2 => {
            m[0] = a[3] / d;
            m[1] = -a[1] / d;
            m[2] = -a[2] / d;
            m[3] = a[0] / d;
        }
        _ => {
            let c = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0 * 3 + c0] * a[r1 * 3 + c1] - a[r0 * 3 + c1] * a[r1 * 3 + c0];
            m[0] = c(1, 2, 1, 2) / d;
            m[1] = -c(0, 2, 1, 2) / d;
            m[2] = c(0, 1, 1, 2) / d;
            m[3] = -c(1, 2, 0, 2) / d;
            m[4] = c(0, 2, 0, 2) / d;
            m[5] = -c(0, 1, 0, 2) / d;
            m[6] = c(1, 2, 0, 1) / d;
            m[7] = -c(0, 2, 0, 1) / d;
            m[8] = c(0, 1, 0, 1) / d;
        }
    }
    Some(m)
}

/// Builds a matrix field from a pointwise rule.
pub(crate) fn build(grid: Grid, rows: usize, cols: usize, f: impl Fn(usize) -> Mat + Sync + Send) -> SpectralField {
    let n = grid.npoints();
    let c = rows * cols;
    let per_point: Vec<Mat> = (0..n).into_par_iter().map(f).collect();
    let mut values = vec![0.0; c * n];
    for (flat, m) in per_point.iter().enumerate() {
        for k in 0..c {
            values[k * n + flat] = m[k];
        }
    }
    SpectralField::from_values(grid, c, values).expect("finite matrix entries")
}

/// Pointwise product of two matrix fields.
pub fn mat_mul(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let grid = *a.grid();
    let dim = grid.dim();
    build(grid, dim, dim, |p| mul(&load(a, dim, p), &load(b, dim, p), dim))
}

pub fn mat_transpose(a: &SpectralField) -> SpectralField {
    let grid = *a.grid();
    let dim = grid.dim();
    build(grid, dim, dim, |p| transpose(&load(a, dim, p), dim))
}

pub fn mat_identity(grid: Grid) -> SpectralField {
    let dim = grid.dim();
    build(grid, dim, dim, |_| identity(dim))
}

/// `(M v)_i = sum_j M_ij v_j` pointwise.
pub fn mat_vec(m: &SpectralField, v: &SpectralField) -> SpectralField {
    let grid = *m.grid();
    let dim = grid.dim();
    let n = grid.npoints();
    let vv = v.values();
    build(grid, dim, 1, |p| {
        let a = load(m, dim, p);
        let mut out = [0.0; 9];
        for i in 0..dim {
            out[i] = (0..dim).map(|j| a[i * dim + j] * vv[j * n + p]).sum();
        }
        out
    })
}

/// `det M` pointwise.
pub fn mat_det(m: &SpectralField) -> SpectralField {
    let grid = *m.grid();
    let dim = grid.dim();
    build(grid, 1, 1, |p| {
        let mut o = [0.0; 9];
        o[0] = det(&load(m, dim, p), dim);
        o
    })
}

/// Pointwise direct inverse.
pub fn mat_inverse(m: &SpectralField) -> Result<SpectralField> {
    let grid = *m.grid();
    let dim = grid.dim();
    let inv: Vec<Option<Mat>> = (0..grid.npoints()).into_par_iter().map(|p| inverse(&load(m, dim, p), dim)).collect();
    if inv.iter().any(|m| m.is_none()) {
        return Err(Error::Incompatible("singular matrix in pointwise inversion".into()));
    }
    Ok(build(grid, dim, dim, |p| inv[p].expect("checked")))
}

/// Largest entry of `|A - B|` over all points.
pub fn mat_max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.max_abs_diff(b)
}

/// Partial sums of `sum_k (-C)^k` with a certificate.
#[derive(Clone, Debug)]
pub struct NeumannInverse {
    pub a: SpectralField,
    /// Highest power used.
    pub terms: usize,
    /// `max_x ||C(x)||_inf` (induced norm).
    pub rho: f64,
    /// `rho^{terms+1} / (1 - rho)`, bounding the neglected tail.
    pub tail_bound: f64,
}

/// `(I + C)^{-1}` by the Neumann series. Powers are added while the largest
/// entry of the next one exceeds `tol`, up to `k_max`.
pub fn neumann_inverse(c: &SpectralField, tol: f64, k_max: usize) -> Result<NeumannInverse> {
    let grid = *c.grid();
    let dim = grid.dim();
    let n = grid.npoints();
    let rho = (0..n).into_par_iter().map(|p| row_sum_norm(&load(c, dim, p), dim)).reduce(|| 0.0, f64::max);
    if rho >= 1.0 {
        return Err(Error::NeumannDivergent { rho });
    }
    let mut sum: Vec<Mat> = vec![identity(dim); n];
    let mut term: Vec<Mat> = vec![identity(dim); n];
    let mut k = 0;
    while k < k_max {
        let next: Vec<Mat> = term.par_iter().enumerate().map(|(p, t)| mul(t, &load(c, dim, p), dim).map(|x| -x)).collect();
        let step = next.par_iter().map(max_abs).reduce(|| 0.0, f64::max);
        if step <= tol {
            break;
        }
        sum.par_iter_mut().zip(&next).for_each(|(s, t)| *s = add(s, t, 1.0));
        term = next;
        k += 1;
    }
    let a = build(grid, dim, dim, |p| sum[p]);
    Ok(NeumannInverse { a, terms: k, rho, tail_bound: rho.powi(k as i32 + 1) / (1.0 - rho) })
}

/// `(I + C)^{-1}` summed to exactly `k` powers.
pub fn neumann_partial_sum(c: &SpectralField, k: usize) -> SpectralField {
    let grid = *c.grid();
    let dim = grid.dim();
    build(grid, dim, dim, |p| {
        let cm = load(c, dim, p);
        let mut t = identity(dim);
        let mut s = identity(dim);
        for _ in 0..k {
            t = mul(&t, &cm, dim).map(|x| -x);
            s = add(&s, &t, 1.0);
        }
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_3x3() {
        let a: Mat = [2.0, 1.0, 0.0, 0.5, 3.0, 1.0, 0.0, -1.0, 1.5];
        let inv = inverse(&a, 3).unwrap();
        let id = mul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * 3 + j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn nilpotent_series_stops_after_one_term() {
        let g = Grid::periodic(2, 8).unwrap();
        let c = build(g, 2, 2, |_| [0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let inv = neumann_inverse(&c, 1e-12, 64).unwrap();
        assert_eq!(inv.terms, 1);
        let direct = mat_inverse(&mat_identity(g).add(&c)).unwrap();
        assert!(inv.a.max_abs_diff(&direct) < 1e-15);
    }

    #[test]
    fn large_c_is_rejected() {
        let g = Grid::periodic(2, 8).unwrap();
        let c = build(g, 2, 2, |_| [0.6, 0.5, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(neumann_inverse(&c, 1e-12, 64), Err(Error::NeumannDivergent { .. })));
    }
}
