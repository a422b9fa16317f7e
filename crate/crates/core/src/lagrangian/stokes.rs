//! Linear Stokes system with prescribed divergence:
//! `d_t v - Lap v + grad P = f`, `div v = g`, `d_t g = div R`, `v(0) = 0`.

use crate::duhamel::{op_c, TimeSeriesField};
use crate::error::{Error, Result};
use crate::spectral::{divergence, gradient, riesz_riesz};

#[derive(Clone, Debug)]
pub struct StokesSolution {
    pub v: TimeSeriesField,
    pub grad_p: TimeSeriesField,
    /// `max_t ||div v - g||_2` (spectral).
    pub div_residual: f64,
}

/// `grad P = grad Lap^{-1} div(f - R + grad g)`, then `v = C(f - grad P)`.
pub fn stokes_div_block_solve(f: &TimeSeriesField, g: &TimeSeriesField, r: &TimeSeriesField) -> Result<StokesSolution> {
    if f.times() != g.times() || f.times() != r.times() {
        return Err(Error::TimeGridMismatch("f, g and R must share one time grid".into()));
    }
    let dim = f.grid().dim();
    f.fields()[0].require_components(dim)?;
    r.fields()[0].require_components(dim)?;
    g.fields()[0].require_components(1)?;
    let g0 = g.fields()[0].linf_norm();
    let scale = g.fields().iter().map(|x| x.linf_norm()).fold(0.0, f64::max).max(1.0);
    if g0 > 1e-12 * scale {
        return Err(Error::Incompatible(format!("div v(0) = g(0) must vanish for v(0) = 0, found ||g(0)|| = {g0:e}")));
    }
    let pressure = (0..f.len())
        .map(|k| riesz_riesz(&f.fields()[k].sub(&r.fields()[k]).add(&gradient(&g.fields()[k]))))
        .collect::<Result<Vec<_>>>()?;
    let grad_p = TimeSeriesField::new(f.times().to_vec(), pressure)?;
    let v = op_c(&f.combine(1.0, &grad_p, -1.0)?)?;
    let mut div_residual = 0.0f64;
    for (vk, gk) in v.fields().iter().zip(g.fields()) {
        div_residual = div_residual.max(divergence(vk)?.sub(gk).l2_norm_fourier());
    }
    Ok(StokesSolution { v, grad_p, div_residual })
}
