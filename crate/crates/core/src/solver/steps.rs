//! Linear solves for the director and velocity iterates. Each time step uses
//! the exponential integrator of the Duhamel module; the implicit occurrence
//! of the new iterate in the forcing is resolved by inner sweeps.

use rayon::prelude::*;

use crate::duhamel::{ExpWeights, TimeSeriesField};
use crate::error::{Error, Result};
use crate::spectral::{
    advect, divergence, gradient, gradient_outer, laplacian, leray_project, riesz_riesz, scalar_times, squared_norm,
    PhysicalConstants, SpectralField,
};

/// Inner sweep control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSettings {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for InnerSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_sweeps: 20 }
    }
}

fn require_aligned(a: &TimeSeriesField, b: &TimeSeriesField) -> Result<()> {
    if a.times() != b.times() {
        return Err(Error::TimeGridMismatch("iterates must share one time grid".into()));
    }
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

struct WeightCache {
    diffusivity: f64,
    cached: Option<(f64, ExpWeights)>,
}

impl WeightCache {
    fn get(&mut self, grid: &crate::spectral::Grid, h: f64) -> &ExpWeights {
        let stale = !matches!(&self.cached, Some((hh, _)) if (hh - h).abs() <= 1e-14 * h);
        if stale {
            self.cached = Some((h, ExpWeights::new(grid, self.diffusivity, h)));
        }
        &self.cached.as_ref().expect("just filled").1
    }
}

/// Runs one time step `y_{k+1} = decay y_k + w_old P g(y_k) + w_new P g(y_{k+1})`
/// with `g` evaluated by `forcing`, sweeping on the implicit end value.
fn implicit_step(
    what: &'static str,
    weights: &ExpWeights,
    y0: &SpectralField,
    g0: &SpectralField,
    forcing: impl Fn(&SpectralField) -> Result<SpectralField>,
    inner: InnerSettings,
) -> Result<SpectralField> {
    let grid = *y0.grid();
    let c = y0.components();
    let advance = |g1: &SpectralField| SpectralField::from_fourier(grid, c, weights.step(y0.fourier(), g0.fourier(), g1.fourier()));
    // The explicit predictor freezes the forcing at the old level.
    let mut guess = advance(g0);
    let mut history: Vec<f64> = Vec::with_capacity(inner.max_sweeps);
    for sweep in 0..inner.max_sweeps {
        let next = advance(&forcing(&guess)?);
        let res = next.max_abs_diff(&guess);
        guess = next;
        if res <= inner.tol * guess.linf_norm().max(1.0) {
            break;
        }
        history.push(res);
        if sweep >= 5 && res > history[sweep - 5] {
            return Err(Error::InnerDivergence { what, sweeps: sweep + 1, residual: res });
        }
    }
    Ok(guess)
}

/// Director iterate: `d_t - gamma Lap d = -u_prev . grad d_prev + gamma |grad d_prev|^2 d`
/// with `d(t_0) = d0`. With `normalize` set, every new level is projected
/// pointwise onto the sphere.
pub fn director_step(
    d_prev: &TimeSeriesField,
    u_prev: &TimeSeriesField,
    d0: &SpectralField,
    gamma: f64,
    inner: InnerSettings,
    normalize: bool,
) -> Result<TimeSeriesField> {
    require_aligned(d_prev, u_prev)?;
    let grid = *d_prev.grid();
    let dim = grid.dim();
    d0.require_components(dim)?;
    u_prev.fields()[0].require_components(dim)?;
    let times = d_prev.times();
    let pre = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let dp = &d_prev.fields()[k];
            let adv = advect(&u_prev.fields()[k], dp)?.scale(-1.0);
            let weight = squared_norm(&gradient(dp)).scale(gamma);
            Ok((adv, weight))
        })
        .collect::<Result<Vec<_>>>()?;
    let forcing = |k: usize, d: &SpectralField| -> Result<SpectralField> { Ok(pre[k].0.add(&scalar_times(&pre[k].1, d))) };
    let mut cache = WeightCache { diffusivity: gamma, cached: None };
    let mut fields = Vec::with_capacity(times.len());
    let mut current = d0.clone();
    let mut g_old = forcing(0, &current)?;
    fields.push(current.clone());
    for k in 0..times.len() - 1 {
        let w = cache.get(&grid, times[k + 1] - times[k]);
        let mut next = implicit_step("director", w, &current, &g_old, |d| forcing(k + 1, d), inner)?;
        if normalize {
            next = project_to_sphere(&next);
        }
        g_old = forcing(k + 1, &next)?;
        fields.push(next.clone());
        current = next;
    }
    TimeSeriesField::new(times.to_vec(), fields)
}

/// `d / |d|` pointwise; zero vectors are left alone.
pub(crate) fn project_to_sphere(d: &SpectralField) -> SpectralField {
    d.map_points(d.components(), |v, o| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (oi, vi) in o.iter_mut().zip(v) {
            *oi = if norm > 0.0 { vi / norm } else { *vi };
        }
    })
}

/// The momentum forcing `-lambda div(grad d . grad d) + a (nu Lap u_prev - grad pi_prev)`.
pub(crate) fn momentum_forcing(
    d: &SpectralField,
    a: &SpectralField,
    u_prev: &SpectralField,
    gpi_prev: &SpectralField,
    constants: &PhysicalConstants,
) -> Result<SpectralField> {
    let dim = d.grid().dim();
    let stress = gradient_outer(&gradient(d), dim);
    let elastic = divergence(&stress)?.scale(-constants.lambda);
    let viscous = laplacian(u_prev).scale(constants.nu).sub(gpi_prev);
    Ok(elastic.add(&scalar_times(a, &viscous)))
}

/// Velocity iterate and its pressure gradient:
/// `u_t - nu Lap u = P{-u_prev . grad u + F}` with `u(t_0) = u0` and
/// `grad Pi = RR.{-u_prev . grad u + F}`.
pub fn velocity_step(
    u_prev: &TimeSeriesField,
    d_n: &TimeSeriesField,
    a_n: &TimeSeriesField,
    gpi_prev: &TimeSeriesField,
    u0: &SpectralField,
    constants: &PhysicalConstants,
    inner: InnerSettings,
) -> Result<(TimeSeriesField, TimeSeriesField)> {
    require_aligned(u_prev, d_n)?;
    require_aligned(u_prev, a_n)?;
    require_aligned(u_prev, gpi_prev)?;
    let grid = *u_prev.grid();
    let dim = grid.dim();
    u0.require_components(dim)?;
    let times = u_prev.times();
    let forces = (0..times.len())
        .into_par_iter()
        .map(|k| momentum_forcing(&d_n.fields()[k], &a_n.fields()[k], &u_prev.fields()[k], &gpi_prev.fields()[k], constants))
        .collect::<Result<Vec<_>>>()?;
    let raw = |k: usize, u: &SpectralField| -> Result<SpectralField> { Ok(forces[k].sub(&advect(&u_prev.fields()[k], u)?)) };
    let projected = |k: usize, u: &SpectralField| -> Result<SpectralField> { leray_project(&raw(k, u)?) };
    let mut cache = WeightCache { diffusivity: constants.nu, cached: None };
    let mut us = Vec::with_capacity(times.len());
    let mut pis = Vec::with_capacity(times.len());
    let mut current = u0.clone();
    let g = raw(0, &current)?;
    pis.push(riesz_riesz(&g)?);
    let mut g_old = leray_project(&g)?;
    us.push(current.clone());
    for k in 0..times.len() - 1 {
        let w = cache.get(&grid, times[k + 1] - times[k]);
        let next = implicit_step("velocity", w, &current, &g_old, |u| projected(k + 1, u), inner)?;
        let g = raw(k + 1, &next)?;
        pis.push(riesz_riesz(&g)?);
        g_old = leray_project(&g)?;
        us.push(next.clone());
        current = next;
    }
    Ok((TimeSeriesField::new(times.to_vec(), us)?, TimeSeriesField::new(times.to_vec(), pis)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn zeros(grid: Grid, c: usize, t_end: f64, steps: usize) -> TimeSeriesField {
        TimeSeriesField::sample(t_end, steps, |_| SpectralField::zeros(grid, c)).unwrap()
    }

    fn rotating(grid: Grid, m: f64) -> SpectralField {
        let k = 2.0 * PI * m / grid.box_length();
        SpectralField::from_fn(grid, 2, |x, o| {
            o[0] = (k * x[0]).cos();
            o[1] = (k * x[0]).sin();
        })
    }

    #[test]
    fn constant_director_is_fixed() {
        let g = Grid::periodic(2, 16).unwrap();
        let d0 = SpectralField::from_fn(g, 2, |_, o| {
            o[0] = 0.6;
            o[1] = 0.8;
        });
        let u = zeros(g, 2, 0.5, 16);
        let d = director_step(&u, &u, &d0, 1.0, InnerSettings::default(), false).unwrap();
        for f in d.fields() {
            assert!(f.max_abs_diff(&d0) < 1e-14);
        }
    }

    #[test]
    fn stationary_director_is_a_fixed_point() {
        // Lap d0 = -k^2 d0 and |grad d0|^2 = k^2, so feeding d0 back in
        // reproduces d0.
        let g = Grid::periodic(2, 32).unwrap();
        let d0 = rotating(g, 1.0);
        let t_end = 1.0;
        let steps = 64;
        let dprev = TimeSeriesField::sample(t_end, steps, |_| d0.clone()).unwrap();
        let u = zeros(g, 2, t_end, steps);
        let d = director_step(&dprev, &u, &d0, 1.0, InnerSettings::default(), false).unwrap();
        let worst = d.fields().iter().map(|f| f.max_abs_diff(&d0)).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn taylor_green_decays_exactly() {
        let g = Grid::periodic(2, 32).unwrap();
        let nu = 0.7;
        let u0 = SpectralField::from_fn(g, 2, |x, o| {
            o[0] = x[0].cos() * x[1].sin();
            o[1] = -x[0].sin() * x[1].cos();
        });
        let t_end = 0.5;
        let steps = 32;
        let uprev = TimeSeriesField::sample(t_end, steps, |t| u0.scale((-2.0 * nu * t).exp())).unwrap();
        let d = TimeSeriesField::sample(t_end, steps, |_| {
            SpectralField::from_fn(g, 2, |_, o| {
                o[0] = 1.0;
                o[1] = 0.0;
            })
        })
        .unwrap();
        let a = zeros(g, 1, t_end, steps);
        let pi = zeros(g, 2, t_end, steps);
        let c = PhysicalConstants::new(nu, 1.0, 1.0).unwrap();
        let (u, gp) = velocity_step(&uprev, &d, &a, &pi, &u0, &c, InnerSettings::default()).unwrap();
        for (t, f) in u.times().iter().zip(u.fields()) {
            let exact = u0.scale((-2.0 * nu * t).exp());
            assert!(f.sub(&exact).l2_norm() <= 1e-10 * exact.l2_norm());
        }
        // The pressure balances the advection: grad Pi = -grad(cos 2x + cos 2y)/4 e^{-4 nu t}.
        let t = u.times()[steps];
        let exact_pi = SpectralField::from_fn(g, 2, |x, o| {
            let s = (-4.0 * nu * t).exp() / 2.0;
            o[0] = s * (2.0 * x[0]).sin();
            o[1] = s * (2.0 * x[1]).sin();
        });
        assert!(gp.fields()[steps].max_abs_diff(&exact_pi) < 1e-10);
    }

    #[test]
    fn stationary_director_drives_no_flow() {
        let g = Grid::periodic(2, 32).unwrap();
        let d0 = rotating(g, 2.0);
        let d = TimeSeriesField::sample(0.25, 8, |_| d0.clone()).unwrap();
        let u = zeros(g, 2, 0.25, 8);
        let a = zeros(g, 1, 0.25, 8);
        let (un, gp) = velocity_step(&u, &d, &a, &u, &u.fields()[0], &PhysicalConstants::default(), InnerSettings::default()).unwrap();
        for (f, p) in un.fields().iter().zip(gp.fields()) {
            assert!(f.linf_norm() < 1e-12);
            assert!(p.linf_norm() < 1e-10);
        }
    }
}
