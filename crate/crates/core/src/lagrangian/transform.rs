//! Pullback of an Eulerian trajectory along its flow, and residuals of the
//! equations the pulled-back fields satisfy.
//!
//! Matrix fields use the Jacobian layout: `h_{cj} = d_{x_j} d_c` at `X`, so
//! `h = D_y(omega) A` and `(D_x u)(X) = D_y(v) A`. For volume-preserving
//! flows `(div_x F)(X)` is the row divergence of `F A^T` and
//! `(Lap_x g)(X) = div_y(A A^T grad_y g)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::FlowMap;
use super::matrix::{self, mat_mul, mat_transpose, mat_vec};
use crate::error::{Error, Result};
use crate::solver::Trajectory;
use crate::spectral::{divergence, gradient, PhysicalConstants, SpectralField};

/// Lagrangian fields on the same time grid as the flow map.
#[derive(Clone, Debug)]
pub struct LagrangianState {
    pub times: Vec<f64>,
    pub b: Vec<SpectralField>,
    pub v: Vec<SpectralField>,
    pub omega: Vec<SpectralField>,
    pub p: Vec<SpectralField>,
    /// `A = (D_y X)^{-1}` per level.
    pub a: Vec<SpectralField>,
    /// Pullback of `D_x d`.
    pub h_pullback: Vec<SpectralField>,
    /// `D_y(omega) A`.
    pub h: Vec<SpectralField>,
    pub constants: PhysicalConstants,
}

/// Pressure with zero mean from its gradient.
pub fn pressure_from_gradient(gpi: &SpectralField) -> SpectralField {
    let grid = *gpi.grid();
    let modes = grid.modes();
    let dim = grid.dim();
    gpi.map_modes(1, |flat, g, out| {
        let xi2 = modes.xi2[flat];
        out[0] = if xi2 == 0.0 || modes.nyquist[flat] {
            Complex64::new(0.0, 0.0)
        } else {
            let s: Complex64 = (0..dim).map(|j| g[j] * modes.xi[flat][j]).sum();
            s * Complex64::new(0.0, -1.0 / xi2)
        };
    })
}

/// Pulls `a, u, d, Pi` back along `X` and builds `h` both ways.
pub fn to_lagrangian(traj: &Trajectory, fm: &FlowMap) -> Result<LagrangianState> {
    let times = traj.times();
    if times.len() != fm.times.len() || times.iter().zip(&fm.times).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0)) {
        return Err(Error::TimeGridMismatch("trajectory and flow map use different time grids".into()));
    }
    if traj.grid() != fm.grid() {
        return Err(Error::GridMismatch);
    }
    let parts: Vec<_> = traj
        .snapshots()
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let b = fm.pull_back(k, &s.a);
            let v = fm.pull_back(k, &s.u);
            let omega = fm.pull_back(k, &s.d);
            let p = fm.pull_back(k, &pressure_from_gradient(&s.grad_pi));
            let h_pullback = fm.pull_back(k, &gradient(&s.d));
            let h = mat_mul(&gradient(&omega), &fm.a[k]);
            (b, v, omega, p, h_pullback, h)
        })
        .collect();
    let mut st = LagrangianState {
        times,
        b: vec![],
        v: vec![],
        omega: vec![],
        p: vec![],
        a: fm.a.clone(),
        h_pullback: vec![],
        h: vec![],
        constants: traj.constants(),
    };
    for (b, v, omega, p, hp, h) in parts {
        st.b.push(b);
        st.v.push(v);
        st.omega.push(omega);
        st.p.push(p);
        st.h_pullback.push(hp);
        st.h.push(h);
    }
    Ok(st)
}

impl LagrangianState {
    /// `max_k ||h_pullback - D_y(omega) A||_inf`.
    pub fn h_discrepancy(&self) -> f64 {
        self.h.iter().zip(&self.h_pullback).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }

    /// `max_k ||b(t_k) - b(0)||_inf`.
    pub fn transport_defect(&self) -> f64 {
        self.b.iter().map(|b| b.max_abs_diff(&self.b[0])).fold(0.0, f64::max)
    }
}

/// `max_k max_y |(D_x u)(t_k, X) - D_y v A|`.
pub fn velocity_gradient_discrepancy(traj: &Trajectory, fm: &FlowMap, lag: &LagrangianState) -> f64 {
    traj.snapshots()
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let lhs = fm.pull_back(k, &gradient(&s.u));
            let rhs = mat_mul(&gradient(&lag.v[k]), &lag.a[k]);
            lhs.max_abs_diff(&rhs)
        })
        .reduce(|| 0.0, f64::max)
}

/// `sum_{j,m} A_{mj} d_m h_{cj}` for every row `c`.
pub(crate) fn a_colon_grad(a: &SpectralField, h: &SpectralField) -> SpectralField {
    let grid = *a.grid();
    let dim = grid.dim();
    let n = grid.npoints();
    let gh = gradient(h);
    let gv = gh.values();
    matrix::build(grid, dim, 1, |p| {
        let am = matrix::load(a, dim, p);
        let mut out = [0.0; 9];
        for c in 0..dim {
            let mut s = 0.0;
            for j in 0..dim {
                for m in 0..dim {
                    s += am[m * dim + j] * gv[((c * dim + j) * dim + m) * n + p];
                }
            }
            out[c] = s;
        }
        out
    })
}

/// `(Lap_x g)(X) = div_y(A A^T grad_y g)` for every component of `g`.
pub(crate) fn lagrangian_laplacian(a: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    let aat = mat_mul(a, &mat_transpose(a));
    let parts = (0..g.components())
        .map(|c| {
            let w = mat_vec(&aat, &gradient(&g.component(c)));
            divergence(&w)
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralField::stack(&parts.iter().collect::<Vec<_>>())
}

/// Row divergence of `F A^T`, i.e. `(div_x F)(X)`.
pub(crate) fn lagrangian_row_div(a: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    divergence(&mat_mul(f, &mat_transpose(a)))
}

/// `trace(D_y v A)`.
pub(crate) fn lagrangian_div(a: &SpectralField, v: &SpectralField) -> SpectralField {
    let k = mat_mul(&gradient(v), a);
    let dim = a.grid().dim();
    let mut acc = k.component(0);
    for i in 1..dim {
        acc = acc.add(&k.component(i * dim + i));
    }
    acc
}

/// `A^T grad_y P`.
pub(crate) fn lagrangian_grad(a: &SpectralField, p: &SpectralField) -> SpectralField {
    mat_vec(&mat_transpose(a), &gradient(p))
}

fn pointwise_scale(s: &SpectralField, f: &SpectralField) -> SpectralField {
    let n = s.grid().npoints();
    let sv = s.values();
    let mut values = f.values().to_vec();
    for (i, v) in values.iter_mut().enumerate() {
        *v *= sv[i % n];
    }
    SpectralField::from_values(*f.grid(), f.components(), values).expect("finite")
}

/// `|h|^2` pointwise.
pub(crate) fn frob2(h: &SpectralField) -> SpectralField {
    h.map_points(1, |v, o| o[0] = v.iter().map(|x| x * x).sum())
}

/// `h^T h`.
pub(crate) fn gram(h: &SpectralField) -> SpectralField {
    mat_mul(&mat_transpose(h), h)
}

/// The non-time-derivative parts of each equation at one level, so that a
/// residual is `d_t(field) + rest`.
pub(crate) struct Rest {
    pub momentum: SpectralField,
    pub director: SpectralField,
    pub divergence: SpectralField,
    pub h_eq: SpectralField,
}

pub(crate) fn rest(
    a: &SpectralField,
    b: &SpectralField,
    v: &SpectralField,
    omega: &SpectralField,
    p: &SpectralField,
    c: &PhysicalConstants,
) -> Result<Rest> {
    let dim = a.grid().dim();
    let n = a.grid().npoints();
    let h = mat_mul(&gradient(omega), a);
    // momentum: (1 + b)(A^T grad P - nu Lap_x v) + lambda div_x(h^T h)
    let lap_v = lagrangian_row_div(a, &mat_mul(&gradient(v), a))?;
    let pv = lagrangian_grad(a, p).axpy(-c.nu, &lap_v);
    let one_plus_b = b.map_points(1, |x, o| o[0] = 1.0 + x[0]);
    let momentum = pointwise_scale(&one_plus_b, &pv).axpy(c.lambda, &lagrangian_row_div(a, &gram(&h))?);
    // director: -gamma A^T : grad h - gamma |h|^2 omega
    let h2 = frob2(&h);
    let director = a_colon_grad(a, &h).scale(-c.gamma).axpy(-c.gamma, &pointwise_scale(&h2, omega));
    let divergence = lagrangian_div(a, v);
    // h equation: K^T-contraction + (-gamma Lap_x h) - gamma (2 (h : d_x h) omega + |h|^2 h)
    let kmat = mat_mul(&gradient(v), a);
    let gh = gradient(&h);
    let hv = h.values();
    let kv = kmat.values();
    let gv = gh.values();
    let av = a.values();
    let ov = omega.values();
    let h2v = h2.values();
    let lap_h = lagrangian_laplacian(a, &h)?;
    let lv = lap_h.values();
    let h_eq = matrix::build(*a.grid(), dim, dim, |pt| {
        let mut out = [0.0; 9];
        // d_{x_j} h_{kl} = sum_m A_{mj} d_m h_{kl}
        let dx = |kl: usize, j: usize| -> f64 { (0..dim).map(|m| av[(m * dim + j) * n + pt] * gv[(kl * dim + m) * n + pt]).sum() };
        for cc in 0..dim {
            for j in 0..dim {
                let adv: f64 = (0..dim).map(|k| kv[(k * dim + j) * n + pt] * hv[(cc * dim + k) * n + pt]).sum();
                let quad: f64 = (0..dim * dim).map(|kl| hv[kl * n + pt] * dx(kl, j)).sum();
                let e = cc * dim + j;
                out[e] = adv - c.gamma * lv[e * n + pt]
                    - c.gamma * (2.0 * quad * ov[cc * n + pt] + h2v[pt] * hv[e * n + pt]);
            }
        }
        out
    });
    Ok(Rest { momentum, director, divergence, h_eq })
}

/// Per-equation `L^2` residual maxima over interior levels (centered time
/// differences).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LagrangianResiduals {
    pub transport: f64,
    pub momentum: f64,
    pub director: f64,
    pub divergence: f64,
    pub h_equation: f64,
}

impl LagrangianResiduals {
    pub fn max(&self) -> f64 {
        [self.transport, self.momentum, self.director, self.divergence, self.h_equation].into_iter().fold(0.0, f64::max)
    }
}

pub fn lagrangian_residuals(lag: &LagrangianState) -> Result<LagrangianResiduals> {
    let k_last = lag.times.len() - 1;
    if k_last < 2 {
        return Err(Error::TimeGridMismatch("need at least three levels for centered differences".into()));
    }
    let per = (1..k_last)
        .into_par_iter()
        .map(|k| {
            let dt = lag.times[k + 1] - lag.times[k - 1];
            let ddt = |f: &[SpectralField]| f[k + 1].sub(&f[k - 1]).scale(1.0 / dt);
            let r = rest(&lag.a[k], &lag.b[k], &lag.v[k], &lag.omega[k], &lag.p[k], &lag.constants)?;
            let h_next = mat_mul(&gradient(&lag.omega[k + 1]), &lag.a[k + 1]);
            let h_prev = mat_mul(&gradient(&lag.omega[k - 1]), &lag.a[k - 1]);
            Ok([
                ddt(&lag.b).l2_norm(),
                ddt(&lag.v).add(&r.momentum).l2_norm(),
                ddt(&lag.omega).add(&r.director).l2_norm(),
                r.divergence.l2_norm(),
                h_next.sub(&h_prev).scale(1.0 / dt).add(&r.h_eq).l2_norm(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let m = |i: usize| per.iter().map(|v| v[i]).fold(0.0, f64::max);
    Ok(LagrangianResiduals { transport: m(0), momentum: m(1), director: m(2), divergence: m(3), h_equation: m(4) })
}
