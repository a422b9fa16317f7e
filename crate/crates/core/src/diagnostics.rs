//! Trajectory-level checks: the energy law, constraint monitors, scaling
//! covariance and an aggregated verdict.
//!
//! The energy is `E = 1/2 int (rho |u|^2 + lambda |grad d|^2)` with
//! `rho = 1 / (1 + a)`, and the dissipation uses the on-sphere form
//! `int nu |grad u|^2 + lambda gamma |Lap d + |grad d|^2 d|^2`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{dyadic_rescale, smallness_eta, sphere_drift};
use crate::error::{Error, Result};
use crate::solver::{default_test_functions, weak_form_residual, StateSnapshot, Trajectory};
use crate::spectral::{divergence_norm, gradient, laplacian, scalar_times, squared_norm};

/// Lower bound on `a` accepted when reconstructing `rho`.
pub const A_FLOOR: f64 = -0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub time: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub de_dt: f64,
    /// `|dE/dt + dissipation|`.
    pub residual: f64,
    pub div_norm: f64,
    pub sphere_drift: f64,
    pub a_max: f64,
}

fn level(s: &StateSnapshot) -> Result<(f64, f64, f64, f64, f64)> {
    let c = s.constants;
    let a_min = s.a.values().iter().cloned().fold(f64::INFINITY, f64::min);
    if a_min <= A_FLOOR {
        return Err(Error::Incompatible(format!("a = {a_min} at t = {} is below the density guard {A_FLOOR}", s.time)));
    }
    let grad_d = gradient(&s.d);
    let u2 = squared_norm(&s.u);
    let kinetic = s.a.zip_points(&u2, 1, |a, q, o| o[0] = q[0] / (1.0 + a[0])).integral();
    let energy = 0.5 * (kinetic + c.lambda * squared_norm(&grad_d).integral());
    let tension = laplacian(&s.d).add(&scalar_times(&squared_norm(&grad_d), &s.d));
    let dissipation = c.nu * squared_norm(&gradient(&s.u)).integral() + c.lambda * c.gamma * squared_norm(&tension).integral();
    Ok((energy, dissipation, divergence_norm(&s.u)?, sphere_drift(&s.d), s.a.linf_norm()))
}

/// One row per time level. `dE/dt` uses centered differences inside and
/// second-order one-sided differences at the ends.
pub fn energy_report(traj: &Trajectory) -> Result<Vec<DiagnosticsRow>> {
    let per = traj.snapshots().par_iter().map(level).collect::<Result<Vec<_>>>()?;
    let times = traj.times();
    let k = per.len();
    let e: Vec<f64> = per.iter().map(|p| p.0).collect();
    let dt = traj.dt;
    let de = |i: usize| -> f64 {
        if k < 3 {
            return if k == 2 { (e[1] - e[0]) / dt } else { 0.0 };
        }
        if i == 0 {
            (-3.0 * e[0] + 4.0 * e[1] - e[2]) / (2.0 * dt)
        } else if i == k - 1 {
            (3.0 * e[k - 1] - 4.0 * e[k - 2] + e[k - 3]) / (2.0 * dt)
        } else {
            (e[i + 1] - e[i - 1]) / (2.0 * dt)
        }
    };
    Ok(per
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let de_dt = de(i);
            DiagnosticsRow {
                time: times[i],
                energy: p.0,
                dissipation: p.1,
                de_dt,
                residual: (de_dt + p.1).abs(),
                div_norm: p.2,
                sphere_drift: p.3,
                a_max: p.4,
            }
        })
        .collect())
}

/// Largest step-to-step energy increase relative to `max(1, E(0))`.
pub fn energy_increase(rows: &[DiagnosticsRow]) -> f64 {
    let scale = rows.first().map_or(1.0, |r| r.energy.max(1.0));
    rows.windows(2).map(|w| (w[1].energy - w[0].energy) / scale).fold(0.0, f64::max)
}

/// `lambda = 2^j` for exact powers of two.
pub fn dyadic_power(lambda: f64) -> Result<i32> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::NonDyadic(format!("lambda = {lambda}")));
    }
    let j = lambda.log2().round();
    if 2f64.powi(j as i32) != lambda {
        return Err(Error::NonDyadic(format!("lambda = {lambda} is not a power of two")));
    }
    Ok(j as i32)
}

/// `(a, u, d, Pi)_lambda = (a, lambda u, d, lambda^2 Pi)(lambda^2 t, lambda x)`
/// with `lambda = 2^j`: the samples are kept, the box shrinks to `L / lambda`
/// and times shrink by `lambda^2`. The stored pressure gradient therefore
/// picks up `lambda^3`, the same factor as `du/dt`.
pub fn rescale_trajectory(traj: &Trajectory, lam_power: i32) -> Result<Trajectory> {
    let lam = 2f64.powi(lam_power);
    let snaps = traj
        .snapshots()
        .iter()
        .map(|s| {
            Ok(StateSnapshot {
                time: s.time / (lam * lam),
                a: dyadic_rescale(&s.a, lam_power, 0.0)?,
                u: dyadic_rescale(&s.u, lam_power, 1.0)?,
                d: dyadic_rescale(&s.d, lam_power, 0.0)?,
                grad_pi: dyadic_rescale(&s.grad_pi, lam_power, 3.0)?,
                constants: s.constants,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(snaps, traj.iteration)
}

/// Below this level a normalized residual counts as round-off.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: f64,
    pub residual: f64,
    pub residual_rescaled: f64,
    pub eta: f64,
    pub eta_rescaled: f64,
}

impl ScalingReport {
    /// Residuals agree within a factor 2 (both at round-off also counts).
    pub fn residuals_agree(&self) -> bool {
        let (a, b) = (self.residual.max(RESIDUAL_FLOOR), self.residual_rescaled.max(RESIDUAL_FLOOR));
        a.max(b) <= 2.0 * a.min(b)
    }

    pub fn eta_drift(&self) -> f64 {
        (self.eta_rescaled - self.eta).abs() / self.eta.max(f64::MIN_POSITIVE)
    }
}

fn max_weak(traj: &Trajectory) -> Result<f64> {
    let tests = default_test_functions(traj.grid(), traj.t_end - traj.times()[0]);
    let shifted: Vec<_> = tests
        .into_iter()
        .map(|mut t| {
            t.window = (t.window.0 + traj.times()[0], t.window.1 + traj.times()[0]);
            t
        })
        .collect();
    Ok(weak_form_residual(traj, &shifted)?.iter().map(|w| w.max_abs()).fold(0.0, f64::max))
}

/// Weak residuals and the critical initial-data norm before and after a
/// dyadic rescaling. `p`, `r` index the Besov norm in `eta`.
pub fn scaling_check(traj: &Trajectory, lam_power: i32, p: f64, r: f64) -> Result<ScalingReport> {
    let scaled = rescale_trajectory(traj, lam_power)?;
    let eta_of = |t: &Trajectory| {
        let s = &t.snapshots()[0];
        smallness_eta(&s.a, &s.u, &s.d, p, r)
    };
    Ok(ScalingReport {
        lambda: 2f64.powi(lam_power),
        residual: max_weak(traj)?,
        residual_rescaled: max_weak(&scaled)?,
        eta: eta_of(traj)?,
        eta_rescaled: eta_of(&scaled)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub values: Vec<(String, f64)>,
}

impl SuiteResult {
    pub fn new(name: impl Into<String>, passed: bool, values: Vec<(String, f64)>) -> Self {
        Self { name: name.into(), passed, values }
    }

    pub fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self { name: format!("{} ({err})", name.into()), passed: false, values: vec![] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub suites: Vec<SuiteResult>,
}

impl Verdict {
    pub fn push(&mut self, s: SuiteResult) {
        self.suites.push(s);
    }

    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    /// One `PASS`/`FAIL` line per suite followed by an overall line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            let _ = write!(out, "{} {}", if s.passed { "PASS" } else { "FAIL" }, s.name);
            for (k, v) in &s.values {
                let _ = write!(out, " {k}={v:.6e}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{}", if self.passed() { "OVERALL PASS" } else { "OVERALL FAIL" });
        out
    }
}

/// Thresholds for [`verify_trajectory`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub weak_tol: f64,
    pub energy_increase_tol: f64,
    /// On `max |dE/dt + D| / max(max D, max |dE/dt|)`.
    pub energy_law_tol: f64,
    pub div_tol: f64,
    pub sphere_tol: f64,
    /// Index of the smallness norm; the defaults match the scheme's 2-D defaults.
    pub p: f64,
    pub r: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { weak_tol: 1e-5, energy_increase_tol: 1e-8, energy_law_tol: 1e-3, div_tol: 1e-8, sphere_tol: 1e-4, p: 1.2, r: 1.5 }
    }
}

/// Energy, constraint, weak-form and scaling suites on one trajectory.
pub fn verify_trajectory(traj: &Trajectory, opts: &VerifyOptions) -> Verdict {
    let mut v = Verdict::default();
    match energy_report(traj) {
        Ok(rows) => {
            let inc = energy_increase(&rows);
            let scale = rows.iter().map(|r| r.dissipation.max(r.de_dt.abs())).fold(0.0, f64::max);
            let res = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
            let rel = if scale > 0.0 { res / scale } else { res };
            v.push(SuiteResult::new("energy-monotone", inc <= opts.energy_increase_tol, vec![("max_increase".into(), inc)]));
            v.push(SuiteResult::new("energy-law", rel <= opts.energy_law_tol, vec![("relative_residual".into(), rel)]));
            let div = rows.iter().map(|r| r.div_norm).fold(0.0, f64::max);
            let drift = rows.iter().map(|r| r.sphere_drift).fold(0.0, f64::max);
            v.push(SuiteResult::new(
                "constraints",
                div <= opts.div_tol && drift <= opts.sphere_tol,
                vec![("div_norm".into(), div), ("sphere_drift".into(), drift)],
            ));
        }
        Err(e) => v.push(SuiteResult::failed("energy", &e)),
    }
    match max_weak(traj) {
        Ok(w) => v.push(SuiteResult::new("weak-form", w <= opts.weak_tol, vec![("max_residual".into(), w)])),
        Err(e) => v.push(SuiteResult::failed("weak-form", &e)),
    }
    match scaling_check(traj, 1, opts.p, opts.r) {
        Ok(s) => v.push(SuiteResult::new(
            "scaling",
            s.residuals_agree() && s.eta_drift() <= 0.05,
            vec![("residual".into(), s.residual), ("residual_rescaled".into(), s.residual_rescaled), ("eta_drift".into(), s.eta_drift())],
        )),
        Err(e) => v.push(SuiteResult::failed("scaling", &e)),
    }
    v
}
