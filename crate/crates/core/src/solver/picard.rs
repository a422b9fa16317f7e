//! The outer iteration: starting from zero velocity, pressure and a constant
//! director, alternate transport, director and velocity solves until the
//! increment falls below tolerance.

use serde::{Deserialize, Serialize};

use super::ledger::delta_u;
use super::steps::{director_step, velocity_step, InnerSettings};
use super::transport::transport;
use super::{SchemeConfig, Trajectory};
use crate::besov::smallness_eta;
use crate::duhamel::TimeSeriesField;
use crate::error::{Error, Result};
use crate::spectral::{divergence_norm, PhysicalConstants, SpectralField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// Index of the iterate just produced; `delta_u` measures its distance
    /// to iterate `n - 1`.
    pub n: usize,
    pub delta_u: f64,
    pub components: Vec<(String, f64)>,
    /// `max_t ||a^n(t)||_inf`.
    pub a_max: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub reports: Vec<IterationReport>,
    pub eta: f64,
    pub warnings: Vec<String>,
}

impl PicardOutcome {
    pub fn converged(&self) -> bool {
        self.reports.last().is_some_and(|r| r.converged)
    }

    /// `delta U^{n+1} / delta U^n` for consecutive reports.
    pub fn contraction_ratios(&self) -> Vec<(usize, f64)> {
        self.reports
            .windows(2)
            .map(|w| (w[0].n, if w[0].delta_u == 0.0 { 0.0 } else { w[1].delta_u / w[0].delta_u }))
            .collect()
    }
}

fn validate(a0: &SpectralField, u0: &SpectralField, d0: &SpectralField) -> Result<()> {
    let dim = u0.grid().dim();
    a0.require_components(1)?;
    u0.require_components(dim)?;
    d0.require_components(dim)?;
    a0.require_same_grid(u0)?;
    d0.require_same_grid(u0)?;
    let amin = a0.values().iter().copied().fold(f64::INFINITY, f64::min);
    if amin <= -1.0 {
        return Err(Error::Incompatible(format!("a0 >= -1 somewhere (min {amin}); the density must stay positive")));
    }
    let div = divergence_norm(u0)?;
    if div > 1e-8 * u0.l2_norm().max(1.0) {
        return Err(Error::Incompatible(format!("u0 is not divergence-free (||div u0|| = {div:e})")));
    }
    Ok(())
}

pub fn picard_solve(
    a0: &SpectralField,
    u0: &SpectralField,
    d0: &SpectralField,
    constants: PhysicalConstants,
    config: &SchemeConfig,
) -> Result<PicardOutcome> {
    validate(a0, u0, d0)?;
    let grid = *u0.grid();
    let dim = grid.dim();
    let mut warnings = Vec::new();
    let eta = smallness_eta(a0, u0, d0, config.p_for(dim), config.r)?;
    if eta > config.c0 {
        let msg = format!("smallness eta = {eta:.4e} exceeds c0 = {}", config.c0);
        if !config.warn_only {
            return Err(Error::Hypothesis { lemma: "smallness condition".into(), condition: msg });
        }
        warnings.push(msg);
    }
    let table = if config.r > 1.0 && config.r < 2.0 {
        None
    } else {
        let t = config.weighted_table(dim)?;
        t.check(config.p_for(dim))?;
        Some(t)
    };
    let steps = config.steps()?;
    let inner = InnerSettings { tol: config.inner_tol, max_sweeps: config.inner_max };

    let zeros = |c: usize| TimeSeriesField::sample(config.t_end, steps, |_| SpectralField::zeros(grid, c));
    let mean_d = SpectralField::from_fn(grid, dim, |_, o| {
        for (c, v) in o.iter_mut().enumerate() {
            *v = d0.mean(c);
        }
    });
    let mut u = zeros(dim)?;
    let mut d = TimeSeriesField::sample(config.t_end, steps, |_| mean_d.clone())?;
    let mut gpi = zeros(dim)?;
    let mut a = zeros(1)?;
    let mut reports = Vec::new();
    for n in 1..=config.n_max {
        let a_n = transport(a0, &u)?;
        let d_n = director_step(&d, &u, d0, constants.gamma, inner, config.normalize_director)?;
        let (u_n, gpi_n) = velocity_step(&u, &d_n, &a_n, &gpi, u0, &constants, inner)?;
        let (delta, components) = delta_u((&u, &d, &gpi), (&u_n, &d_n, &gpi_n), config.r, table.as_ref())?;
        let converged = delta <= config.tol;
        let a_max = a_n.fields().iter().map(|f| f.linf_norm()).fold(0.0, f64::max);
        reports.push(IterationReport { n, delta_u: delta, components, a_max, converged });
        a = a_n;
        d = d_n;
        u = u_n;
        gpi = gpi_n;
        if converged {
            break;
        }
    }
    let trajectory = Trajectory::from_series(&a, &u, &d, &gpi, constants, reports.len())?;
    Ok(PicardOutcome { trajectory, reports, eta, warnings })
}
