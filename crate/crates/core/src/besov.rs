//! Littlewood-Paley blocks, homogeneous Besov norms and the heat-semigroup
//! characterization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{gradient, heat_semigroup, Grid, SpectralField};

/// Regularity `s`, integrability `p` and summability `r` of `B^s_{p,r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovIndex {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::InvalidIndex(format!("s must be finite, got {s}")));
        }
        if !(p > 1.0) {
            return Err(Error::InvalidIndex(format!("p must exceed 1, got {p}")));
        }
        if !(r >= 1.0) {
            return Err(Error::InvalidIndex(format!("r must be at least 1, got {r}")));
        }
        Ok(Self { s, p, r })
    }
}

/// Quintic smoothstep cutoff: 1 on `[0, 1/2]`, 0 on `[1, inf)`.
pub fn chi(rho: f64) -> f64 {
    if rho <= 0.5 {
        1.0
    } else if rho >= 1.0 {
        0.0
    } else {
        let t = 2.0 * rho - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Dyadic annulus multiplier `chi(xi 2^{-q-1}) - chi(xi 2^{-q})`.
pub fn phi(q: i32, xi: f64) -> f64 {
    chi(xi * 2f64.powi(-q - 1)) - chi(xi * 2f64.powi(-q))
}

/// Block indices that can be nonzero on this grid.
pub fn q_range(grid: &Grid) -> (i32, i32) {
    let lo = grid.base_frequency();
    let hi = lo * (grid.dim() as f64).sqrt() * (grid.points_per_axis() / 2) as f64;
    (lo.log2().floor() as i32, hi.log2().ceil() as i32)
}

#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub blocks: Vec<(i32, SpectralField)>,
    pub q_min: i32,
    pub q_max: i32,
}

impl DyadicDecomposition {
    pub fn block(&self, q: i32) -> Option<&SpectralField> {
        self.blocks.iter().find(|(k, _)| *k == q).map(|(_, b)| b)
    }

    pub fn reconstruct(&self) -> Option<SpectralField> {
        let mut it = self.blocks.iter();
        let first = it.next()?.1.clone();
        Some(it.fold(first, |acc, (_, b)| acc.add(b)))
    }
}

fn single_block(f: &SpectralField, q: i32) -> SpectralField {
    let modes = f.grid().modes();
    f.scale_modes(|flat| {
        if flat == 0 {
            num_complex::Complex64::new(0.0, 0.0)
        } else {
            num_complex::Complex64::new(phi(q, modes.xi2[flat].sqrt()), 0.0)
        }
    })
}

pub fn dyadic_blocks(f: &SpectralField) -> Result<DyadicDecomposition> {
    f.require_mean_zero()?;
    let (q_min, q_max) = q_range(f.grid());
    let blocks = (q_min..=q_max).map(|q| (q, single_block(f, q))).collect();
    Ok(DyadicDecomposition { blocks, q_min, q_max })
}

/// `(q, ||Delta_q f||_{L^p})` for every block on the grid.
pub fn block_norms(f: &SpectralField, p: f64) -> Result<Vec<(i32, f64)>> {
    f.require_mean_zero()?;
    let (q_min, q_max) = q_range(f.grid());
    Ok((q_min..=q_max).map(|q| (q, single_block(f, q).lp_norm(p))).collect())
}

fn lr_sum(terms: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        terms.map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

pub fn besov_norm(f: &SpectralField, idx: BesovIndex) -> Result<f64> {
    BesovIndex::new(idx.s, idx.p, idx.r)?;
    let norms = block_norms(f, idx.p)?;
    Ok(lr_sum(norms.into_iter().map(|(q, n)| 2f64.powf(idx.s * q as f64) * n), idx.r))
}

/// Geometric time grid with ratio 2.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub times: Vec<f64>,
}

impl TimeGrid {
    /// `2^{e_min}, ..., 2^{e_max}`.
    pub fn geometric(e_min: i32, e_max: i32) -> Self {
        Self { times: (e_min..=e_max).map(|e| 2f64.powi(e)).collect() }
    }

    /// Exactly `[2^{-2 q_max}, 2^{-2 q_min}]`.
    pub fn dyadic(grid: &Grid) -> Self {
        let (q_min, q_max) = q_range(grid);
        Self::geometric(-2 * q_max, -2 * q_min)
    }

    /// The dyadic range padded by 12 octaves below and 6 above; the default
    /// used for quadrature.
    pub fn for_grid(grid: &Grid) -> Self {
        let (q_min, q_max) = q_range(grid);
        Self::geometric(-2 * q_max - 12, -2 * q_min + 6)
    }
}

/// `|| t^{-s/2} ||e^{t Lap} f||_{L^p} ||_{L^r(dt/t)}` by the trapezoid rule in
/// `log t`, plus a closed-form tail below the first grid time.
pub fn heat_characterization_norm(f: &SpectralField, idx: BesovIndex, tg: &TimeGrid) -> Result<f64> {
    BesovIndex::new(idx.s, idx.p, idx.r)?;
    if idx.s >= 0.0 {
        return Err(Error::InvalidIndex(format!(
            "heat characterization needs s < 0, got {}",
            idx.s
        )));
    }
    f.require_mean_zero()?;
    if tg.times.len() < 2 {
        return Err(Error::InvalidIndex("time grid needs at least two points".into()));
    }
    let g: Vec<f64> = tg
        .times
        .iter()
        .map(|&t| heat_semigroup(f, t).map(|h| t.powf(-idx.s / 2.0) * h.lp_norm(idx.p)))
        .collect::<Result<_>>()?;
    if idx.r.is_infinite() {
        return Ok(g.iter().copied().fold(0.0, f64::max));
    }
    let r = idx.r;
    let h = std::f64::consts::LN_2;
    let last = g.len() - 1;
    let mut sum = 0.0;
    for (j, v) in g.iter().enumerate() {
        let w = if j == 0 || j == last { 0.5 * h } else { h };
        sum += w * v.powf(r);
    }
    // below t_0 the semigroup is close to the identity, so g ~ g_0 (t/t_0)^{-s/2}
    sum += g[0].powf(r) / (-idx.s * r / 2.0);
    Ok(sum.powf(1.0 / r))
}

/// `|| e^{t Lap} f ||_{L^r_t L^p_x}` over `(0, inf)`.
pub fn lr_in_time_norm(f: &SpectralField, p: f64, r: f64, tg: &TimeGrid) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::InvalidIndex("r must be finite for the L^r_t norm".into()));
    }
    heat_characterization_norm(f, BesovIndex::new(-2.0 / r, p, r)?, tg)
}

/// `||f||_{idx2} / ||f||_{idx1}` for an admissible embedding pair; `0/0 = 0`.
pub fn embedding_ratio(f: &SpectralField, idx1: BesovIndex, idx2: BesovIndex) -> Result<f64> {
    let n = f.grid().dim() as f64;
    let expected = idx1.s - n * (1.0 / idx1.p - 1.0 / idx2.p);
    if idx1.p > idx2.p || idx1.r > idx2.r || (idx2.s - expected).abs() > 1e-12 {
        return Err(Error::InvalidIndex(format!(
            "embedding needs p1 <= p2, r1 <= r2 and s2 = s1 - N(1/p1 - 1/p2) = {expected}"
        )));
    }
    let a = besov_norm(f, idx1)?;
    let b = besov_norm(f, idx2)?;
    Ok(if a == 0.0 { 0.0 } else { b / a })
}

/// `||a0||_inf + ||u0||_{B^{N/p-1}_{p,r}} + ||grad d0||_{B^{N/p-1}_{p,r}}`.
pub fn smallness_eta(a0: &SpectralField, u0: &SpectralField, d0: &SpectralField, p: f64, r: f64) -> Result<f64> {
    let drift = sphere_drift(d0);
    if drift > 1e-8 {
        return Err(Error::OffSphere(drift));
    }
    u0.require_mean_zero()?;
    let idx = BesovIndex::new(u0.grid().dim() as f64 / p - 1.0, p, r)?;
    Ok(a0.linf_norm() + besov_norm(u0, idx)? + besov_norm(&gradient(d0), idx)?)
}

pub fn within_smallness(eta: f64, c0: f64) -> bool {
    eta <= c0
}

/// `max_x | |d(x)| - 1 |`.
pub fn sphere_drift(d: &SpectralField) -> f64 {
    let n = d.grid().npoints();
    let c = d.components();
    let v = d.values();
    (0..n)
        .map(|i| ((0..c).map(|k| v[k * n + i].powi(2)).sum::<f64>().sqrt() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Same samples on the box `L / 2^j`, multiplied by `2^{j * weight}`.
/// This realizes `x -> lambda^weight f(lambda x)` with `lambda = 2^j` as an
/// exact shift of dyadic block indices.
pub fn dyadic_rescale(f: &SpectralField, lam_power: i32, weight: f64) -> Result<SpectralField> {
    let lam = 2f64.powi(lam_power);
    let grid = f.grid().with_box_length(f.grid().box_length() / lam)?;
    Ok(f.regrid(grid)?.scale(lam.powf(weight)))
}
