//! Periodic tensor-product cubic Lagrange interpolation (bicubic in 2D,
//! tricubic in 3D).

use crate::spectral::{Grid, SpectralField};

/// Weights for nodes `-1, 0, 1, 2` at fractional offset `s` in `[0, 1)`.
pub fn cubic_weights(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

struct Stencil {
    idx: [[usize; 4]; 3],
    w: [[f64; 4]; 3],
}

fn stencil(grid: &Grid, x: &[f64]) -> Stencil {
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let mut st = Stencil { idx: [[0; 4]; 3], w: [[0.0; 4]; 3] };
    for axis in 0..grid.dim() {
        let u = x[axis] / h;
        let base = u.floor();
        let s = u - base;
        let b = base as i64;
        for (j, slot) in st.idx[axis].iter_mut().enumerate() {
            *slot = (b - 1 + j as i64).rem_euclid(m as i64) as usize;
        }
        st.w[axis] = cubic_weights(s);
    }
    st
}

/// Value of one component (given as its raw samples) at an arbitrary point.
pub fn sample(grid: &Grid, values: &[f64], x: &[f64]) -> f64 {
    apply(grid, &stencil(grid, x), values)
}

fn apply(grid: &Grid, st: &Stencil, values: &[f64]) -> f64 {
    let m = grid.points_per_axis();
    let mut acc = 0.0;
    if grid.dim() == 2 {
        for a in 0..4 {
            let row = st.idx[0][a] * m;
            let mut inner = 0.0;
            for b in 0..4 {
                inner += st.w[1][b] * values[row + st.idx[1][b]];
            }
            acc += st.w[0][a] * inner;
        }
    } else {
        for a in 0..4 {
            for b in 0..4 {
                let base = (st.idx[0][a] * m + st.idx[1][b]) * m;
                let mut inner = 0.0;
                for c in 0..4 {
                    inner += st.w[2][c] * values[base + st.idx[2][c]];
                }
                acc += st.w[0][a] * st.w[1][b] * inner;
            }
        }
    }
    acc
}

/// All components of `f` at point `x`.
pub fn sample_field(f: &SpectralField, x: &[f64], out: &mut [f64]) {
    let st = stencil(f.grid(), x);
    for (c, o) in out.iter_mut().enumerate() {
        *o = apply(f.grid(), &st, f.component_values(c));
    }
}

/// `f(y + disp(y))` at every grid point `y`; `disp` has `N` components.
pub fn compose(f: &SpectralField, disp: &SpectralField) -> SpectralField {
    let grid = *f.grid();
    let n = grid.npoints();
    let dim = grid.dim();
    let c = f.components();
    let mut values = vec![0.0; c * n];
    let dv = disp.values();
    let mut x = [0.0; 3];
    for flat in 0..n {
        let y = grid.point(flat);
        for j in 0..dim {
            x[j] = y[j] + dv[j * n + flat];
        }
        let st = stencil(&grid, &x[..dim]);
        for comp in 0..c {
            values[comp * n + flat] = apply(&grid, &st, f.component_values(comp));
        }
    }
    SpectralField::from_values(grid, c, values).expect("interpolated values are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_reproduce_cubics() {
        for s in [0.0, 0.3, 0.77] {
            let w = cubic_weights(s);
            let nodes = [-1.0, 0.0, 1.0, 2.0];
            for p in 0..4 {
                let v: f64 = w.iter().zip(nodes).map(|(wi, x): (&f64, f64)| wi * x.powi(p)).sum();
                assert!((v - s.powi(p)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interpolates_smooth_field() {
        let g = Grid::periodic(2, 64).unwrap();
        let f = SpectralField::from_fn(g, 1, |x, o| o[0] = (x[0] + 2.0 * x[1]).sin());
        let p = [1.2345, 5.9];
        let v = sample(&g, f.values(), &p);
        assert!((v - (p[0] + 2.0 * p[1]).sin()).abs() < 1e-4);
        // periodic wrap
        let q = [p[0] + 2.0 * std::f64::consts::PI, p[1] - 4.0 * std::f64::consts::PI];
        assert!((sample(&g, f.values(), &q) - v).abs() < 1e-12);
    }

    #[test]
    fn grid_points_are_exact() {
        let g = Grid::periodic(3, 8).unwrap();
        let f = SpectralField::from_fn(g, 1, |x, o| o[0] = x[0] * 0.1 + x[2].cos());
        let flat = 77;
        let x = g.point(flat);
        assert!((sample(&g, f.values(), &x) - f.values()[flat]).abs() < 1e-14);
    }
}
