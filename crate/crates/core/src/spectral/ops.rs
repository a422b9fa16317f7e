//! Fourier multipliers and dealiased pointwise products.

use num_complex::Complex64;

use super::field::SpectralField;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `d f / d x_axis` via the `i k` multiplier, Nyquist mode zeroed.
pub fn derivative(f: &SpectralField, axis: usize) -> Result<SpectralField> {
    let dim = f.grid().dim();
    if axis >= dim {
        return Err(Error::AxisOutOfRange { axis, dim });
    }
    let modes = f.grid().modes();
    Ok(f.scale_modes(|flat| {
        if modes.nyquist[flat] {
            ZERO
        } else {
            Complex64::new(0.0, modes.xi[flat][axis])
        }
    }))
}

/// Multiplies every mode by `exp(-|xi|^2 t)`.
pub fn heat_semigroup(f: &SpectralField, t: f64) -> Result<SpectralField> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let modes = f.grid().modes();
    Ok(f.scale_modes(|flat| Complex64::new((-modes.xi2[flat] * t).exp(), 0.0)))
}

/// Leray projection onto discretely divergence-free fields. The mean mode
/// passes through unchanged.
pub fn leray_project(v: &SpectralField) -> Result<SpectralField> {
    let dim = v.grid().dim();
    v.require_components(dim)?;
    let modes = v.grid().modes();
    Ok(v.map_modes(dim, |flat, input, out| {
        let xi2 = modes.xi2[flat];
        if flat == 0 || xi2 == 0.0 {
            out.copy_from_slice(input);
            return;
        }
        let xi = &modes.xi[flat];
        let kv: Complex64 = (0..dim).map(|j| input[j] * xi[j]).sum();
        for i in 0..dim {
            out[i] = input[i] - kv * (xi[i] / xi2);
        }
    }))
}

/// Gradient part of the Helmholtz decomposition, `k (k . f) / |k|^2`.
/// The mean mode is dropped.
pub fn riesz_riesz(f: &SpectralField) -> Result<SpectralField> {
    let dim = f.grid().dim();
    f.require_components(dim)?;
    let modes = f.grid().modes();
    Ok(f.map_modes(dim, |flat, input, out| {
        let xi2 = modes.xi2[flat];
        if flat == 0 || xi2 == 0.0 {
            out.fill(ZERO);
            return;
        }
        let xi = &modes.xi[flat];
        let kv: Complex64 = (0..dim).map(|j| input[j] * xi[j]).sum();
        for i in 0..dim {
            out[i] = kv * (xi[i] / xi2);
        }
    }))
}

/// Gradient of every component. Output component `c * N + j` is
/// `d f_c / d x_j`.
pub fn gradient(f: &SpectralField) -> SpectralField {
    let dim = f.grid().dim();
    let modes = f.grid().modes();
    let c = f.components();
    f.map_modes(c * dim, |flat, input, out| {
        let xi = &modes.xi[flat];
        let nyq = modes.nyquist[flat];
        for comp in 0..c {
            for j in 0..dim {
                out[comp * dim + j] = if nyq { ZERO } else { input[comp] * Complex64::new(0.0, xi[j]) };
            }
        }
    })
}

/// Row divergence: for `c = k N` components, output `i` is
/// `sum_j d f_{i N + j} / d x_j`. A vector field gives a scalar.
pub fn divergence(f: &SpectralField) -> Result<SpectralField> {
    let dim = f.grid().dim();
    if f.components() % dim != 0 {
        return Err(Error::ComponentMismatch { expected: dim, found: f.components() });
    }
    let rows = f.components() / dim;
    let modes = f.grid().modes();
    Ok(f.map_modes(rows, |flat, input, out| {
        let xi = &modes.xi[flat];
        let nyq = modes.nyquist[flat];
        for (i, o) in out.iter_mut().enumerate() {
            *o = if nyq {
                ZERO
            } else {
                (0..dim).map(|j| input[i * dim + j] * Complex64::new(0.0, xi[j])).sum()
            };
        }
    }))
}

pub fn laplacian(f: &SpectralField) -> SpectralField {
    let modes = f.grid().modes();
    f.scale_modes(|flat| Complex64::new(-modes.xi2[flat], 0.0))
}

/// `L^2` norm of the spectral divergence of a vector field.
pub fn divergence_norm(u: &SpectralField) -> Result<f64> {
    Ok(divergence(u)?.l2_norm_fourier())
}

/// Dealiased `(u . grad) f` for every component of `f`.
pub fn advect(u: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    let dim = u.grid().dim();
    u.require_components(dim)?;
    u.require_same_grid(f)?;
    let grad = gradient(f);
    let c = f.components();
    Ok(u
        .zip_points(&grad, c, |uu, g, out| {
            for (comp, o) in out.iter_mut().enumerate() {
                *o = (0..dim).map(|j| uu[j] * g[comp * dim + j]).sum();
            }
        })
        .dealias())
}

/// `(grad d (.) grad d)_{ij} = sum_k d_i d_k d_j d_k` from a gradient laid out
/// as in [`gradient`]. Output is `N x N`, row-major, dealiased.
pub fn gradient_outer(grad: &SpectralField, dim: usize) -> SpectralField {
    let nc = grad.components() / dim;
    grad.map_points(dim * dim, |g, out| {
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = (0..nc).map(|k| g[k * dim + i] * g[k * dim + j]).sum();
            }
        }
    })
    .dealias()
}

/// Pointwise squared Frobenius norm, dealiased.
pub fn squared_norm(f: &SpectralField) -> SpectralField {
    f.map_points(1, |g, out| out[0] = g.iter().map(|v| v * v).sum()).dealias()
}

/// Dealiased product of a scalar field with every component of `f`.
pub fn scalar_times(s: &SpectralField, f: &SpectralField) -> SpectralField {
    s.zip_points(f, f.components(), |a, b, out| {
        for (o, v) in out.iter_mut().zip(b) {
            *o = a[0] * v;
        }
    })
    .dealias()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::periodic(2, 32).unwrap()
    }

    #[test]
    fn derivative_of_sine() {
        let g = Grid::new(2, 32, 3.0).unwrap();
        let w = 2.0 * PI / 3.0;
        let f = SpectralField::from_fn(g, 1, |x, o| o[0] = (w * x[0]).sin());
        let df = derivative(&f, 0).unwrap();
        let exact = SpectralField::from_fn(g, 1, |x, o| o[0] = w * (w * x[0]).cos());
        assert!(df.max_abs_diff(&exact) < 1e-12);
        assert!(derivative(&f, 2).is_err());
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let f = SpectralField::from_fn(grid(), 1, |_, o| o[0] = 4.2);
        assert!(derivative(&f, 1).unwrap().linf_norm() < 1e-14);
    }

    #[test]
    fn heat_single_mode() {
        let f = SpectralField::from_fn(grid(), 1, |x, o| o[0] = (2.0 * x[0] + 3.0 * x[1]).cos());
        let t = 0.07;
        let h = heat_semigroup(&f, t).unwrap();
        let exact = f.scale((-13.0 * t).exp());
        assert!(h.max_abs_diff(&exact) < 1e-13);
        assert!(heat_semigroup(&f, -1.0).is_err());
        assert_eq!(heat_semigroup(&f, 0.0).unwrap().values(), f.values());
    }

    #[test]
    fn leray_kills_gradients_and_fixes_solenoidal() {
        let phi = SpectralField::from_fn(grid(), 1, |x, o| o[0] = (x[0] + 2.0 * x[1]).sin() * x[0].cos());
        let grad = gradient(&phi);
        assert!(leray_project(&grad).unwrap().linf_norm() < 1e-12);
        assert!(riesz_riesz(&grad).unwrap().max_abs_diff(&grad) < 1e-12);
        let tg = SpectralField::from_fn(grid(), 2, |x, o| {
            o[0] = x[0].cos() * x[1].sin();
            o[1] = -x[0].sin() * x[1].cos();
        });
        assert!(leray_project(&tg).unwrap().max_abs_diff(&tg) < 1e-12);
        assert!(riesz_riesz(&tg).unwrap().linf_norm() < 1e-12);
    }

    #[test]
    fn advect_matches_product_rule() {
        let u = SpectralField::from_fn(grid(), 2, |_, o| {
            o[0] = 1.5;
            o[1] = -0.5;
        });
        let f = SpectralField::from_fn(grid(), 1, |x, o| o[0] = (x[0] - x[1]).sin());
        let a = advect(&u, &f).unwrap();
        let exact = SpectralField::from_fn(grid(), 1, |x, o| o[0] = 2.0 * (x[0] - x[1]).cos());
        assert!(a.max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn gradient_outer_of_rotating_director() {
        let d = SpectralField::from_fn(grid(), 2, |x, o| {
            o[0] = x[0].cos();
            o[1] = x[0].sin();
        });
        let m = gradient_outer(&gradient(&d), 2);
        assert!((m.component(0).linf_norm() - 1.0).abs() < 1e-12);
        for c in 1..4 {
            assert!(m.component(c).linf_norm() < 1e-12);
        }
    }
}
