//! The iterative scheme: regularized data, the linearized transport,
//! director and velocity solves, the increment monitor and norm ledgers.

mod ledger;
mod picard;
mod regularize;
mod steps;
mod transport;
mod weak;

use serde::{Deserialize, Serialize};

use crate::duhamel::{TimeSeriesField, WeightedExponentTable};
use crate::error::{Error, Result};
use crate::spectral::{Grid, PhysicalConstants, SpectralField};

pub use ledger::{delta_u, x_norm_ledger, x_norm_ledger_parts, y_norm_ledger, y_norm_ledger_parts, LedgerKind, NormLedger};
pub use picard::{picard_solve, IterationReport, PicardOutcome};
pub use regularize::regularize_data;
pub use steps::{director_step, velocity_step, InnerSettings};
pub use transport::{transport, transport_step};
pub use weak::{default_test_functions, weak_form_residual, TestFunction, WeakResidual};

/// Full state at one time level.
#[derive(Clone, Debug)]
pub struct StateSnapshot {
    pub time: f64,
    /// `a = 1/rho - 1`.
    pub a: SpectralField,
    pub u: SpectralField,
    pub d: SpectralField,
    pub grad_pi: SpectralField,
    pub constants: PhysicalConstants,
}

/// Snapshots on a uniform time grid, produced by Picard iterate `iteration`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    snapshots: Vec<StateSnapshot>,
    pub iteration: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl Trajectory {
    pub fn new(snapshots: Vec<StateSnapshot>, iteration: usize) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::EmptySeries);
        }
        let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        let tol = 1e-9 * dt.max(1e-300);
        if times.windows(2).any(|w| w[1] <= w[0] || ((w[1] - w[0]) - dt).abs() > tol.max(1e-12 * times[times.len() - 1])) {
            return Err(Error::TimeGridMismatch("trajectory times must be uniform and increasing".into()));
        }
        let t_end = times[times.len() - 1];
        Ok(Self { snapshots, iteration, dt, t_end })
    }

    /// Assembles a trajectory from aligned series.
    pub fn from_series(
        a: &TimeSeriesField,
        u: &TimeSeriesField,
        d: &TimeSeriesField,
        grad_pi: &TimeSeriesField,
        constants: PhysicalConstants,
        iteration: usize,
    ) -> Result<Self> {
        let times = a.times();
        for s in [u, d, grad_pi] {
            if s.times() != times {
                return Err(Error::TimeGridMismatch("series must share one time grid".into()));
            }
        }
        let snapshots = (0..times.len())
            .map(|k| StateSnapshot {
                time: times[k],
                a: a.fields()[k].clone(),
                u: u.fields()[k].clone(),
                d: d.fields()[k].clone(),
                grad_pi: grad_pi.fields()[k].clone(),
                constants,
            })
            .collect();
        Self::new(snapshots, iteration)
    }

    pub fn snapshots(&self) -> &[StateSnapshot] {
        &self.snapshots
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].u.grid()
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.snapshots[0].constants
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    fn series(&self, pick: impl Fn(&StateSnapshot) -> &SpectralField) -> TimeSeriesField {
        TimeSeriesField::new(self.times(), self.snapshots.iter().map(|s| pick(s).clone()).collect())
            .expect("trajectory times are validated")
    }

    pub fn a_series(&self) -> TimeSeriesField {
        self.series(|s| &s.a)
    }

    pub fn u_series(&self) -> TimeSeriesField {
        self.series(|s| &s.u)
    }

    pub fn d_series(&self) -> TimeSeriesField {
        self.series(|s| &s.d)
    }

    pub fn grad_pi_series(&self) -> TimeSeriesField {
        self.series(|s| &s.grad_pi)
    }

    pub fn last(&self) -> &StateSnapshot {
        &self.snapshots[self.snapshots.len() - 1]
    }
}

/// Scheme parameters. `p = None` selects `N r / (3r - 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub r: f64,
    pub p: Option<f64>,
    pub t_end: f64,
    /// `None` selects `t_end / 256`.
    pub dt: Option<f64>,
    pub tol: f64,
    pub n_max: usize,
    pub c0: f64,
    pub warn_only: bool,
    pub normalize_director: bool,
    pub inner_tol: f64,
    pub inner_max: usize,
    /// Weighted exponents used for the increment when `r >= 2`.
    pub y_table: Option<WeightedExponentTable>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            r: 1.5,
            p: None,
            t_end: 1.0,
            dt: None,
            tol: 1e-8,
            n_max: 30,
            c0: 0.05,
            warn_only: false,
            normalize_director: false,
            inner_tol: 1e-10,
            inner_max: 20,
            y_table: None,
        }
    }
}

impl SchemeConfig {
    pub fn p_for(&self, dim: usize) -> f64 {
        self.p.unwrap_or(dim as f64 * self.r / (3.0 * self.r - 2.0))
    }

    pub fn steps(&self) -> Result<usize> {
        let dt = self.dt.unwrap_or(self.t_end / 256.0);
        if !(self.t_end > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidIndex(format!("need T > 0 and dt > 0, got T = {}, dt = {dt}", self.t_end)));
        }
        let steps = (self.t_end / dt).round();
        if (steps * dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::InvalidIndex(format!("T = {} is not a multiple of dt = {dt}", self.t_end)));
        }
        Ok(steps as usize)
    }

    /// Default weighted table for `r >= 2`: `p1` halfway inside its window
    /// and `p3 = inf`.
    pub fn weighted_table(&self, dim: usize) -> Result<WeightedExponentTable> {
        if let Some(t) = self.y_table {
            return Ok(t);
        }
        let n = dim as f64;
        let lo = self.p_for(dim).max(n * self.r / (2.0 * self.r - 1.0));
        WeightedExponentTable::new(dim, self.r, 0.5 * (lo + n), f64::INFINITY, 0.0)
    }
}
