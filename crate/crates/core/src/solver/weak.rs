//! Space-time integral identities of a trajectory against band-limited test
//! functions `theta(t) cos(2 pi k.x / L + phase)`.
//!
//! Each identity is a sum of integrals `T_j`; the reported residual is the
//! signed ratio `sum_j T_j / sum_j int |integrand_j|` (zero when every
//! integrand vanishes).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::spectral::{advect, gradient, gradient_outer, laplacian, scalar_times, squared_norm, Grid, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub wavevector: [i64; 3],
    pub phase: f64,
    /// Open support `(t_a, t_b)` of the time bump.
    pub window: (f64, f64),
    /// Component of the vector equations tested against.
    pub component: usize,
}

impl TestFunction {
    fn bump(&self, t: f64) -> (f64, f64) {
        let (ta, tb) = self.window;
        let s = (2.0 * t - ta - tb) / (tb - ta);
        if s.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - s * s;
        let theta = (1.0 - 1.0 / q).exp();
        (theta, theta * (-2.0 * s / (q * q)) * 2.0 / (tb - ta))
    }
}

/// Signed normalized residuals of the four identities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub transport: f64,
    pub divergence: f64,
    pub momentum: f64,
    pub director: f64,
}

impl WeakResidual {
    pub fn values(&self) -> [f64; 4] {
        [self.transport, self.divergence, self.momentum, self.director]
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Low wavevectors at two phases, every component, supported on
/// `(0.1 T, 0.9 T)`.
pub fn default_test_functions(grid: &Grid, t_end: f64) -> Vec<TestFunction> {
    let mut ks = vec![[1, 0, 0], [0, 1, 0], [1, 1, 0], [2, -1, 0]];
    if grid.dim() == 3 {
        ks.push([0, 0, 1]);
        ks.push([1, -1, 2]);
    }
    let mut out = Vec::new();
    for k in ks {
        for phase in [0.0, 0.7] {
            for component in 0..grid.dim() {
                out.push(TestFunction { wavevector: k, phase, window: (0.1 * t_end, 0.9 * t_end), component });
            }
        }
    }
    out
}

// Term layout of the spatial integrals.
const TR_DT: usize = 0;
const TR_ADV: usize = 1;
const DIV: usize = 2;
const MO_DT: usize = 3;
const MO_ADV: usize = 4;
const MO_P: usize = 5;
const MO_EL: usize = 6;
const DI_DT: usize = 7;
const DI_ADV: usize = 8;
const DI_LAP: usize = 9;
const DI_CUB: usize = 10;
const TERMS: usize = 11;

/// Fields entering the identities at one time level.
struct Level {
    a: SpectralField,
    u: SpectralField,
    d: SpectralField,
    u_adv: SpectralField,
    pressure_visc: SpectralField,
    stress: SpectralField,
    d_adv: SpectralField,
    d_lap: SpectralField,
    d_cubic: SpectralField,
}

fn level(s: &super::StateSnapshot) -> Result<Level> {
    let c = s.constants;
    let dim = s.u.grid().dim();
    let visc = s.grad_pi.sub(&laplacian(&s.u).scale(c.nu));
    let pressure_visc = visc.add(&scalar_times(&s.a, &visc));
    let gd = gradient(&s.d);
    Ok(Level {
        a: s.a.clone(),
        u: s.u.clone(),
        d: s.d.clone(),
        u_adv: advect(&s.u, &s.u)?,
        pressure_visc,
        stress: gradient_outer(&gd, dim).scale(c.lambda),
        d_adv: advect(&s.u, &s.d)?,
        d_lap: laplacian(&s.d).scale(c.gamma),
        d_cubic: scalar_times(&squared_norm(&gd), &s.d).scale(c.gamma),
    })
}

/// `psi` and `grad psi` on the grid.
fn profile(grid: &Grid, tf: &TestFunction) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = grid.dim();
    let n = grid.npoints();
    let kk: Vec<f64> = (0..dim).map(|j| 2.0 * PI * tf.wavevector[j] as f64 / grid.box_length()).collect();
    let mut psi = vec![0.0; n];
    let mut grad = vec![vec![0.0; n]; dim];
    for flat in 0..n {
        let x = grid.point(flat);
        let arg: f64 = (0..dim).map(|j| kk[j] * x[j]).sum::<f64>() + tf.phase;
        psi[flat] = arg.cos();
        for j in 0..dim {
            grad[j][flat] = -kk[j] * arg.sin();
        }
    }
    (psi, grad)
}

/// Signed and absolute spatial integrals of each term (time factor excluded).
fn spatial(lv: &Level, tf: &TestFunction, psi: &[f64], grad: &[Vec<f64>]) -> [(f64, f64); TERMS] {
    let grid = lv.u.grid();
    let dim = grid.dim();
    let n = grid.npoints();
    let c = tf.component;
    let dv = grid.cell_volume();
    let mut out = [(0.0, 0.0); TERMS];
    let a = lv.a.values();
    let u = lv.u.values();
    let mut add = |slot: usize, v: f64| {
        out[slot].0 += v * dv;
        out[slot].1 += v.abs() * dv;
    };
    for i in 0..n {
        let p = psi[i];
        let u_grad: f64 = (0..dim).map(|j| u[j * n + i] * grad[j][i]).sum();
        add(TR_DT, a[i] * p);
        add(TR_ADV, a[i] * u_grad);
        add(DIV, u_grad);
        add(MO_DT, lv.u.component_values(c)[i] * p);
        add(MO_ADV, -lv.u_adv.component_values(c)[i] * p);
        add(MO_P, -lv.pressure_visc.component_values(c)[i] * p);
        let el: f64 = (0..dim).map(|j| lv.stress.component_values(c * dim + j)[i] * grad[j][i]).sum();
        add(MO_EL, el);
        add(DI_DT, lv.d.component_values(c)[i] * p);
        add(DI_ADV, -lv.d_adv.component_values(c)[i] * p);
        add(DI_LAP, lv.d_lap.component_values(c)[i] * p);
        add(DI_CUB, lv.d_cubic.component_values(c)[i] * p);
    }
    out
}

fn ratio(signed: f64, abs: f64) -> f64 {
    if abs == 0.0 {
        0.0
    } else {
        signed / abs
    }
}

/// Residuals of the transport, divergence, momentum and director identities
/// for every test function.
pub fn weak_form_residual(traj: &Trajectory, tests: &[TestFunction]) -> Result<Vec<WeakResidual>> {
    let grid = *traj.grid();
    let times = traj.times();
    for tf in tests {
        let (ta, tb) = tf.window;
        if !(ta > times[0] && tb < times[times.len() - 1] && ta < tb) || tf.component >= grid.dim() {
            return Err(Error::InvalidIndex(format!("test function {tf:?} must sit inside the time window and component range")));
        }
    }
    let profiles: Vec<_> = tests.iter().map(|tf| profile(&grid, tf)).collect();
    // per level, per test function, per term
    let per_level = traj
        .snapshots()
        .par_iter()
        .map(|s| {
            let lv = level(s)?;
            Ok(tests.iter().zip(&profiles).map(|(tf, (psi, g))| spatial(&lv, tf, psi, g)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = (0..times.len())
        .map(|k| {
            let left = if k > 0 { times[k] - times[k - 1] } else { 0.0 };
            let right = if k + 1 < times.len() { times[k + 1] - times[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let derivative_terms = [TR_DT, MO_DT, DI_DT];
    Ok(tests
        .iter()
        .enumerate()
        .map(|(i, tf)| {
            let mut signed = [0.0; TERMS];
            let mut abs = [0.0; TERMS];
            for (k, t) in times.iter().enumerate() {
                let (theta, dtheta) = tf.bump(*t);
                for term in 0..TERMS {
                    let w = if derivative_terms.contains(&term) { dtheta } else { theta };
                    let (s, a) = per_level[k][i][term];
                    signed[term] += h[k] * w * s;
                    abs[term] += h[k] * w.abs() * a;
                }
            }
            let sum = |r: std::ops::Range<usize>| (r.clone().map(|j| signed[j]).sum::<f64>(), r.map(|j| abs[j]).sum::<f64>());
            let (ts, ta) = sum(TR_DT..DIV);
            let (ds, da) = sum(DIV..MO_DT);
            let (ms, ma) = sum(MO_DT..DI_DT);
            let (rs, ra) = sum(DI_DT..TERMS);
            WeakResidual { transport: ratio(ts, ta), divergence: ratio(ds, da), momentum: ratio(ms, ma), director: ratio(rs, ra) }
        })
        .collect())
}
