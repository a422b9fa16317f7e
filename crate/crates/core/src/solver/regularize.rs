//! Smoothing of the initial data: a grid mollifier for `a0` and dyadic
//! frequency truncation for `u0` and `d0`.

use num_complex::Complex64;

use crate::besov::dyadic_blocks;
use crate::error::Result;
use crate::spectral::SpectralField;

/// Convolution with the periodized Gaussian of width `1/n`, normalized to
/// unit mass on the grid. The kernel is positive, so the result is a convex
/// combination of samples; it is clamped to the input range to remove
/// round-off. `n = 0` returns the mean.
fn mollify(a: &SpectralField, n: u32) -> SpectralField {
    let grid = *a.grid();
    let np = grid.npoints();
    let c = a.components();
    if n == 0 {
        return SpectralField::from_fn(grid, c, |_, o| {
            for (k, v) in o.iter_mut().enumerate() {
                *v = a.mean(k);
            }
        });
    }
    let width = 1.0 / n as f64;
    let length = grid.box_length();
    let images = (6.0 * width / length).ceil() as i64 + 1;
    let kernel = SpectralField::from_fn(grid, 1, |x, o| {
        let mut prod = 1.0;
        for &xi in &x[..grid.dim()] {
            let mut s = 0.0;
            for m in -images..=images {
                let y = xi + m as f64 * length;
                s += (-0.5 * (y / width).powi(2)).exp();
            }
            prod *= s;
        }
        o[0] = prod;
    });
    let mass: f64 = kernel.values().iter().sum();
    // Fourier coefficients are normalized by 1/M^N, so the circular
    // convolution sum_j K_j a_{i-j} has coefficients M^N K^ a^.
    let scale = np as f64 / mass;
    let kh = kernel.fourier().to_vec();
    let smoothed = a.map_modes(c, |flat, inp, out| {
        for (o, v) in out.iter_mut().zip(inp) {
            *o = v * kh[flat] * Complex64::new(scale, 0.0);
        }
    });
    let mut values = smoothed.into_values();
    for k in 0..c {
        let src = a.component_values(k);
        let (lo, hi) = src.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        for v in &mut values[k * np..(k + 1) * np] {
            *v = v.clamp(lo, hi);
        }
    }
    SpectralField::from_values(grid, c, values).expect("finite")
}

/// `sum_{|q| <= n}` of the dyadic blocks of the mean-free part.
fn truncate(f: &SpectralField, n: u32) -> Result<SpectralField> {
    let blocks = dyadic_blocks(&f.mean_free())?;
    let mut acc = SpectralField::zeros(*f.grid(), f.components());
    for (q, b) in &blocks.blocks {
        if q.unsigned_abs() <= n {
            acc = acc.add(b);
        }
    }
    Ok(acc)
}

/// Regularized data `(a0_n, u0_n, d0_n)`. `u0` is truncated as is (it must
/// be mean-free); `d0` keeps its mean and has the fluctuation truncated.
pub fn regularize_data(
    a0: &SpectralField,
    u0: &SpectralField,
    d0: &SpectralField,
    n: u32,
) -> Result<(SpectralField, SpectralField, SpectralField)> {
    u0.require_mean_zero()?;
    let a = mollify(a0, n);
    let u = truncate(u0, n)?;
    let dm = d0.sub(&d0.mean_free());
    let d = dm.add(&truncate(d0, n)?);
    Ok((a, u, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::q_range;
    use crate::spectral::Grid;

    #[test]
    fn full_band_returns_mean_free_part() {
        let g = Grid::periodic(2, 32).unwrap();
        let u = SpectralField::from_fn(g, 2, |x, o| {
            o[0] = x[1].sin() + 0.3 * (5.0 * x[0]).cos();
            o[1] = (3.0 * x[0]).sin();
        });
        let a = SpectralField::zeros(g, 1);
        let (_, qmax) = q_range(&g);
        let (_, un, _) = regularize_data(&a, &u, &u, qmax as u32).unwrap();
        assert!(un.max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn zero_cutoff_keeps_block_zero_only() {
        let g = Grid::periodic(2, 32).unwrap();
        let u = SpectralField::from_fn(g, 2, |x, o| {
            o[0] = x[1].sin() + (8.0 * x[0]).cos();
            o[1] = 0.0;
        });
        let a = SpectralField::zeros(g, 1);
        let (_, un, _) = regularize_data(&a, &u, &u, 0).unwrap();
        let blocks = dyadic_blocks(&u).unwrap();
        assert!(un.max_abs_diff(blocks.block(0).unwrap()) < 1e-14);
    }

    #[test]
    fn mollifier_obeys_max_principle() {
        let g = Grid::periodic(2, 64).unwrap();
        let a = SpectralField::from_fn(g, 1, |x, o| o[0] = if x[0] < 3.0 { 0.4 } else { -0.2 });
        let u = SpectralField::zeros(g, 2);
        for n in [0, 1, 3, 10] {
            let (an, _, _) = regularize_data(&a, &u, &u, n).unwrap();
            assert!(an.linf_norm() <= a.linf_norm());
            assert!((an.mean(0) - a.mean(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn director_mean_survives_truncation() {
        let g = Grid::periodic(2, 16).unwrap();
        let d = SpectralField::from_fn(g, 2, |_, o| {
            o[0] = 0.0;
            o[1] = 1.0;
        });
        let z = SpectralField::zeros(g, 2);
        let (_, _, dn) = regularize_data(&SpectralField::zeros(g, 1), &z, &d, 2).unwrap();
        assert!(dn.max_abs_diff(&d) < 1e-15);
    }
}
