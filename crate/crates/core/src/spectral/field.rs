use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use super::fft;
use super::grid::Grid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Real field with `c` components sampled on a periodic grid.
///
/// Values are stored component-major: component `i` occupies
/// `values[i * M^N .. (i + 1) * M^N]` in row-major axis order.
/// The Fourier coefficients are computed on first use and cached.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
    fourier: OnceLock<Arc<Vec<Complex64>>>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        Self {
            grid,
            components,
            values: vec![0.0; components * grid.npoints()],
            fourier: OnceLock::new(),
        }
    }

    pub fn from_values(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != components * grid.npoints() {
            return Err(Error::ComponentMismatch {
                expected: components * grid.npoints(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Incompatible(format!("non-finite field value {bad}")));
        }
        Ok(Self { grid, components, values, fourier: OnceLock::new() })
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn(grid: Grid, components: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let n = grid.npoints();
        let mut values = vec![0.0; components * n];
        let mut out = vec![0.0; components];
        for flat in 0..n {
            let x = grid.point(flat);
            f(&x[..grid.dim()], &mut out);
            for (c, v) in out.iter().enumerate() {
                values[c * n + flat] = *v;
            }
        }
        Self { grid, components, values, fourier: OnceLock::new() }
    }

    /// Builds a field from normalized Fourier coefficients (component-major).
    /// The coefficients are expected to be hermitian; the real part of the
    /// inverse transform is kept.
    pub fn from_fourier(grid: Grid, components: usize, coeffs: Vec<Complex64>) -> Self {
        let n = grid.npoints();
        assert_eq!(coeffs.len(), components * n, "coefficient length mismatch");
        let mut values = vec![0.0; components * n];
        let mut buf = coeffs.clone();
        for (chunk, out) in buf.chunks_mut(n).zip(values.chunks_mut(n)) {
            fft::inverse(chunk, grid.dim(), grid.points_per_axis());
            for (o, z) in out.iter_mut().zip(chunk.iter()) {
                *o = z.re;
            }
        }
        let cache = OnceLock::new();
        let _ = cache.set(Arc::new(coeffs));
        Self { grid, components, values, fourier: cache }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component_values(&self, c: usize) -> &[f64] {
        let n = self.grid.npoints();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component(&self, c: usize) -> SpectralField {
        let n = self.grid.npoints();
        let out = SpectralField {
            grid: self.grid,
            components: 1,
            values: self.component_values(c).to_vec(),
            fourier: OnceLock::new(),
        };
        if let Some(f) = self.fourier.get() {
            let _ = out.fourier.set(Arc::new(f[c * n..(c + 1) * n].to_vec()));
        }
        out
    }

    /// Concatenates the components of several fields on the same grid.
    pub fn stack(parts: &[&SpectralField]) -> Result<SpectralField> {
        let first = parts.first().ok_or(Error::EmptySeries)?;
        let mut values = Vec::new();
        let mut components = 0;
        for p in parts {
            if p.grid != first.grid {
                return Err(Error::GridMismatch);
            }
            values.extend_from_slice(&p.values);
            components += p.components;
        }
        Ok(SpectralField { grid: first.grid, components, values, fourier: OnceLock::new() })
    }

    /// Same values on a different grid with the same number of points
    /// (used for box rescaling).
    pub fn regrid(&self, grid: Grid) -> Result<SpectralField> {
        if grid.npoints() != self.grid.npoints() || grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        Ok(SpectralField {
            grid,
            components: self.components,
            values: self.values.clone(),
            fourier: OnceLock::new(),
        })
    }

    /// Normalized Fourier coefficients, component-major.
    pub fn fourier(&self) -> &[Complex64] {
        self.fourier.get_or_init(|| {
            let n = self.grid.npoints();
            let mut out: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            for chunk in out.chunks_mut(n) {
                fft::forward(chunk, self.grid.dim(), self.grid.points_per_axis());
            }
            Arc::new(out)
        })
    }

    pub fn has_fourier_cache(&self) -> bool {
        self.fourier.get().is_some()
    }

    pub fn mean(&self, c: usize) -> f64 {
        let n = self.grid.npoints();
        self.values[c * n..(c + 1) * n].iter().sum::<f64>() / n as f64
    }

    /// Copy with every component's mean removed.
    pub fn mean_free(&self) -> SpectralField {
        self.map_modes(self.components, |flat, input, out| {
            if flat == 0 {
                out.fill(ZERO);
            } else {
                out.copy_from_slice(input);
            }
        })
    }

    pub fn require_mean_zero(&self) -> Result<()> {
        let scale = self.linf_norm().max(1.0);
        for c in 0..self.components {
            let m = self.mean(c);
            if m.abs() > 1e-10 * scale {
                return Err(Error::NotMeanZero { component: c, mean: m });
            }
        }
        Ok(())
    }

    pub fn require_components(&self, expected: usize) -> Result<()> {
        if self.components != expected {
            return Err(Error::ComponentMismatch { expected, found: self.components });
        }
        Ok(())
    }

    pub fn require_same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Applies a per-mode linear map. `f(flat, in, out)` sees the `c` input
    /// coefficients of mode `flat` and writes `c_out` output coefficients.
    pub fn map_modes(
        &self,
        c_out: usize,
        f: impl Fn(usize, &[Complex64], &mut [Complex64]) + Sync,
    ) -> SpectralField {
        let n = self.grid.npoints();
        let c_in = self.components;
        let input = self.fourier();
        let mut out = vec![ZERO; c_out * n];
        let mut a = vec![ZERO; c_in];
        let mut b = vec![ZERO; c_out];
        for flat in 0..n {
            for c in 0..c_in {
                a[c] = input[c * n + flat];
            }
            f(flat, &a, &mut b);
            for c in 0..c_out {
                out[c * n + flat] = b[c];
            }
        }
        SpectralField::from_fourier(self.grid, c_out, out)
    }

    /// Scales mode `flat` of every component by `f(flat)`.
    pub fn scale_modes(&self, f: impl Fn(usize) -> Complex64 + Sync) -> SpectralField {
        let n = self.grid.npoints();
        let input = self.fourier();
        let out: Vec<Complex64> = input
            .par_iter()
            .enumerate()
            .map(|(i, z)| z * f(i % n))
            .collect();
        SpectralField::from_fourier(self.grid, self.components, out)
    }

    /// 2/3-rule truncation.
    pub fn dealias(&self) -> SpectralField {
        let modes = self.grid.modes();
        self.scale_modes(|flat| if modes.keep[flat] { Complex64::new(1.0, 0.0) } else { ZERO })
    }

    /// Pointwise map. `f(x_a, out)` receives the components at one grid point.
    pub fn map_points(&self, c_out: usize, f: impl Fn(&[f64], &mut [f64])) -> SpectralField {
        let n = self.grid.npoints();
        let mut values = vec![0.0; c_out * n];
        let mut a = vec![0.0; self.components];
        let mut o = vec![0.0; c_out];
        for flat in 0..n {
            for c in 0..self.components {
                a[c] = self.values[c * n + flat];
            }
            f(&a, &mut o);
            for c in 0..c_out {
                values[c * n + flat] = o[c];
            }
        }
        SpectralField { grid: self.grid, components: c_out, values, fourier: OnceLock::new() }
    }

    /// Pointwise map over two fields on the same grid.
    pub fn zip_points(
        &self,
        other: &SpectralField,
        c_out: usize,
        f: impl Fn(&[f64], &[f64], &mut [f64]),
    ) -> SpectralField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let n = self.grid.npoints();
        let mut values = vec![0.0; c_out * n];
        let mut a = vec![0.0; self.components];
        let mut b = vec![0.0; other.components];
        let mut o = vec![0.0; c_out];
        for flat in 0..n {
            for c in 0..self.components {
                a[c] = self.values[c * n + flat];
            }
            for c in 0..other.components {
                b[c] = other.values[c * n + flat];
            }
            f(&a, &b, &mut o);
            for c in 0..c_out {
                values[c * n + flat] = o[c];
            }
        }
        SpectralField { grid: self.grid, components: c_out, values, fourier: OnceLock::new() }
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        let values = self.values.iter().map(|v| v * s).collect();
        let out = SpectralField { grid: self.grid, components: self.components, values, fourier: OnceLock::new() };
        if let Some(f) = self.fourier.get() {
            let _ = out.fourier.set(Arc::new(f.iter().map(|z| z * s).collect()));
        }
        out
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        assert_eq!(self.components, other.components, "component mismatch");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        let out = SpectralField { grid: self.grid, components: self.components, values, fourier: OnceLock::new() };
        if let (Some(fa), Some(fb)) = (self.fourier.get(), other.fourier.get()) {
            let _ = out.fourier.set(Arc::new(fa.iter().zip(fb.iter()).map(|(a, b)| a + b * s).collect()));
        }
        out
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        self.axpy(-1.0, other)
    }

    /// Grid `L^p` norm with the pointwise Euclidean norm over components.
    /// `p = inf` gives the grid maximum.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let n = self.grid.npoints();
        let pointwise = |flat: usize| -> f64 {
            (0..self.components)
                .map(|c| self.values[c * n + flat].powi(2))
                .sum::<f64>()
                .sqrt()
        };
        if p.is_infinite() {
            return (0..n).map(pointwise).fold(0.0, f64::max);
        }
        let sum: f64 = if p == 2.0 {
            self.values.iter().map(|v| v * v).sum::<f64>()
        } else {
            (0..n).map(|i| pointwise(i).powf(p)).sum()
        };
        (sum * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0)
    }

    pub fn linf_norm(&self) -> f64 {
        self.lp_norm(f64::INFINITY)
    }

    /// `L^2` norm computed on the Fourier side (Parseval).
    pub fn l2_norm_fourier(&self) -> f64 {
        let s: f64 = self.fourier().iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.volume()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Integral over the box of the sum of all component values.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_parseval() {
        let g = Grid::periodic(2, 16).unwrap();
        let f = SpectralField::from_fn(g, 2, |x, o| {
            o[0] = (x[0] + 2.0 * x[1]).sin() + 0.3;
            o[1] = (3.0 * x[0]).cos() * x[1].sin();
        });
        let back = SpectralField::from_fourier(g, 2, f.fourier().to_vec());
        assert!(back.max_abs_diff(&f) < 1e-13);
        let a = f.l2_norm();
        let b = f.l2_norm_fourier();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn norms_of_constant() {
        let g = Grid::new(2, 8, 2.0).unwrap();
        let f = SpectralField::from_fn(g, 1, |_, o| o[0] = 3.0);
        assert!((f.lp_norm(2.0) - 6.0).abs() < 1e-12);
        assert!((f.lp_norm(1.0) - 12.0).abs() < 1e-12);
        assert_eq!(f.linf_norm(), 3.0);
    }
}
