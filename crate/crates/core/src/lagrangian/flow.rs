//! Flow maps of a velocity history: forward characteristics with their
//! Jacobian, inverse maps at selected levels, and `A = (D_y X)^{-1}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{self, mat_identity, mat_inverse, neumann_inverse, Mat};
use crate::duhamel::TimeSeriesField;
use crate::error::{Error, Result};
use crate::interp::{self, cubic_weights};
use crate::spectral::{gradient, Grid, SpectralField};

/// How `A` was obtained at one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InverseSource {
    Neumann { terms: usize, rho: f64, tail_bound: f64 },
    Direct,
}

#[derive(Clone, Debug)]
pub struct FlowMap {
    pub times: Vec<f64>,
    /// `X(t, y) - y`.
    pub displacement: Vec<SpectralField>,
    /// `D_y X`, row-major `N x N`.
    pub jacobian: Vec<SpectralField>,
    /// `(level, Y(t, x) - x)` at the levels where the inverse was computed.
    pub inverse_displacement: Vec<(usize, SpectralField)>,
    /// `(D_y X)^{-1}`.
    pub a: Vec<SpectralField>,
    pub a_source: Vec<InverseSource>,
    /// `int_0^t max_y ||D_y v||_inf ds` with `v = u(t, X)`.
    pub lipschitz_budget: Vec<f64>,
}

/// Neumann tolerance and order cap used for `A`.
pub const NEUMANN_TOL: f64 = 1e-12;
pub const NEUMANN_MAX_TERMS: usize = 64;

/// Per-step data: fields at the level, the half step and their Jacobians.
struct Stage {
    u: SpectralField,
    du: SpectralField,
}

/// Cubic Lagrange interpolation in time at `t_k + h/2` from four
/// neighbouring levels (linear when fewer than four levels exist).
fn half_step(u: &TimeSeriesField, k: usize) -> SpectralField {
    let f = u.fields();
    let last = f.len() - 1;
    if f.len() < 4 {
        return f[k].scale(0.5).axpy(0.5, &f[k + 1]);
    }
    let base = k.clamp(1, last - 2);
    let w = cubic_weights(k as f64 + 0.5 - base as f64);
    let mut acc = f[base - 1].scale(w[0]);
    for j in 1..4 {
        acc = acc.axpy(w[j], &f[base - 1 + j]);
    }
    acc
}

fn stage(u: SpectralField) -> Stage {
    let du = gradient(&u);
    Stage { u, du }
}

/// `(u(x), Du(x) J)` for one point.
#[inline]
fn rhs(s: &Stage, x: &[f64], j: &Mat, dim: usize, out_v: &mut [f64], out_j: &mut Mat) {
    interp::sample_field(&s.u, x, out_v);
    let mut du = [0.0; 9];
    interp::sample_field(&s.du, x, &mut du[..dim * dim]);
    *out_j = matrix::mul(&du, j, dim);
}

/// Velocity only.
#[inline]
fn vel(s: &Stage, x: &[f64], out: &mut [f64]) {
    interp::sample_field(&s.u, x, out);
}

/// Integrates `dX/dt = u(t, X)` and `dJ/dt = Du(t, X) J` with the classical
/// four-stage method. `A` comes from the Neumann series while the Lipschitz
/// budget stays below one and the series converges within
/// `NEUMANN_MAX_TERMS`, and from pointwise inversion otherwise. The inverse
/// map is computed at every `inverse_stride`-th level and at the last one.
pub fn flow_map(u: &TimeSeriesField, inverse_stride: usize) -> Result<FlowMap> {
    let grid = *u.grid();
    let dim = grid.dim();
    u.fields()[0].require_components(dim)?;
    if u.fields().iter().any(|f| f.values().iter().any(|v| !v.is_finite())) {
        return Err(Error::Incompatible("velocity history is not finite".into()));
    }
    let times = u.times().to_vec();
    let k_last = times.len() - 1;
    let n = grid.npoints();
    let levels: Vec<Stage> = u.fields().par_iter().map(|f| stage(f.clone())).collect();
    let halves: Vec<Stage> = (0..k_last).into_par_iter().map(|k| stage(half_step(u, k))).collect();

    let mut x: Vec<[f64; 3]> = (0..n).map(|p| grid.point(p)).collect();
    let mut jac: Vec<Mat> = vec![matrix::identity(dim); n];
    let mut displacement = Vec::with_capacity(times.len());
    let mut jacobian = Vec::with_capacity(times.len());
    let record = |x: &[[f64; 3]], jac: &[Mat]| -> (SpectralField, SpectralField) {
        let mut dv = vec![0.0; dim * n];
        for p in 0..n {
            let y = grid.point(p);
            for c in 0..dim {
                dv[c * n + p] = x[p][c] - y[c];
            }
        }
        let d = SpectralField::from_values(grid, dim, dv).expect("finite displacement");
        let j = matrix::build(grid, dim, dim, |p| jac[p]);
        (d, j)
    };
    let (d0, j0) = record(&x, &jac);
    displacement.push(d0);
    jacobian.push(j0);
    for k in 0..k_last {
        let h = times[k + 1] - times[k];
        let (s0, sh, s1) = (&levels[k], &halves[k], &levels[k + 1]);
        x.par_iter_mut().zip(jac.par_iter_mut()).for_each(|(xp, jp)| {
            let mut kv = [[0.0; 3]; 4];
            let mut kj = [[0.0; 9]; 4];
            let stages = [(s0, 0.0), (sh, 0.5), (sh, 0.5), (s1, 1.0)];
            for (i, (s, c)) in stages.iter().enumerate() {
                let mut xs = [0.0; 3];
                let mut js = *jp;
                if i > 0 {
                    for d in 0..dim {
                        xs[d] = xp[d] + c * h * kv[i - 1][d];
                    }
                    js = matrix::add(jp, &kj[i - 1], c * h);
                } else {
                    xs[..dim].copy_from_slice(&xp[..dim]);
                }
                let (mut v, mut jn) = ([0.0; 3], [0.0; 9]);
                rhs(s, &xs[..dim], &js, dim, &mut v[..dim], &mut jn);
                kv[i] = v;
                kj[i] = jn;
            }
            for d in 0..dim {
                xp[d] += h / 6.0 * (kv[0][d] + 2.0 * kv[1][d] + 2.0 * kv[2][d] + kv[3][d]);
            }
            for e in 0..dim * dim {
                jp[e] += h / 6.0 * (kj[0][e] + 2.0 * kj[1][e] + 2.0 * kj[2][e] + kj[3][e]);
            }
        });
        let (d, j) = record(&x, &jac);
        displacement.push(d);
        jacobian.push(j);
    }

    // Lipschitz budget from D_y v = Du(X) J at each level.
    let lip: Vec<f64> = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let s = &levels[k];
            (0..n)
                .map(|p| {
                    let y = grid.point(p);
                    let mut xs = [0.0; 3];
                    for d in 0..dim {
                        xs[d] = y[d] + displacement[k].component_values(d)[p];
                    }
                    let mut du = [0.0; 9];
                    interp::sample_field(&s.du, &xs[..dim], &mut du[..dim * dim]);
                    let jm = matrix::load(&jacobian[k], dim, p);
                    matrix::row_sum_norm(&matrix::mul(&du, &jm, dim), dim)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let mut lipschitz_budget = vec![0.0; times.len()];
    for k in 1..times.len() {
        lipschitz_budget[k] = lipschitz_budget[k - 1] + 0.5 * (times[k] - times[k - 1]) * (lip[k] + lip[k - 1]);
    }

    let id = mat_identity(grid);
    let inverses = jacobian
        .par_iter()
        .zip(lipschitz_budget.par_iter())
        .map(|(j, budget)| {
            if *budget < 1.0 {
                // a series that hit the order cap has not converged
                let ni = neumann_inverse(&j.sub(&id), NEUMANN_TOL, NEUMANN_MAX_TERMS);
                if let Some(ni) = ni.ok().filter(|ni| ni.terms < NEUMANN_MAX_TERMS) {
                    let src = InverseSource::Neumann { terms: ni.terms, rho: ni.rho, tail_bound: ni.tail_bound };
                    return Ok((ni.a, src));
                }
            }
            Ok((mat_inverse(j)?, InverseSource::Direct))
        })
        .collect::<Result<Vec<_>>>()?;
    let (a, a_source): (Vec<_>, Vec<_>) = inverses.into_iter().unzip();

    let stride = inverse_stride.max(1);
    let wanted: Vec<usize> = (1..=k_last).filter(|k| k % stride == 0 || *k == k_last).collect();
    let mut inverse_displacement = vec![(0, SpectralField::zeros(grid, dim))];
    let backs: Vec<(usize, SpectralField)> = wanted
        .par_iter()
        .map(|&m| {
            let mut z: Vec<[f64; 3]> = (0..n).map(|p| grid.point(p)).collect();
            for k in (0..m).rev() {
                let h = times[k + 1] - times[k];
                let (s1, sh, s0) = (&levels[k + 1], &halves[k], &levels[k]);
                for zp in z.iter_mut() {
                    let mut kv = [[0.0; 3]; 4];
                    let stages = [(s1, 0.0), (sh, 0.5), (sh, 0.5), (s0, 1.0)];
                    for (i, (s, c)) in stages.iter().enumerate() {
                        let mut xs = [0.0; 3];
                        for d in 0..dim {
                            xs[d] = zp[d] - if i > 0 { c * h * kv[i - 1][d] } else { 0.0 };
                        }
                        let mut v = [0.0; 3];
                        vel(s, &xs[..dim], &mut v[..dim]);
                        kv[i] = v;
                    }
                    for d in 0..dim {
                        zp[d] -= h / 6.0 * (kv[0][d] + 2.0 * kv[1][d] + 2.0 * kv[2][d] + kv[3][d]);
                    }
                }
            }
            let mut dv = vec![0.0; dim * n];
            for p in 0..n {
                let x0 = grid.point(p);
                for c in 0..dim {
                    dv[c * n + p] = z[p][c] - x0[c];
                }
            }
            (m, SpectralField::from_values(grid, dim, dv).expect("finite"))
        })
        .collect();
    inverse_displacement.extend(backs);
    Ok(FlowMap { times, displacement, jacobian, inverse_displacement, a, a_source, lipschitz_budget })
}

impl FlowMap {
    pub fn grid(&self) -> &Grid {
        self.displacement[0].grid()
    }

    /// `max |A D_y X - I|` over points and levels.
    pub fn inverse_defect(&self) -> f64 {
        let id = mat_identity(*self.grid());
        self.a
            .par_iter()
            .zip(&self.jacobian)
            .map(|(a, j)| matrix::mat_mul(a, j).max_abs_diff(&id))
            .reduce(|| 0.0, f64::max)
    }

    /// `max |det D_y X - 1|` over points and levels.
    pub fn volume_defect(&self) -> f64 {
        self.jacobian
            .par_iter()
            .map(|j| matrix::mat_det(j).values().iter().fold(0.0, |m: f64, v| m.max((v - 1.0).abs())))
            .reduce(|| 0.0, f64::max)
    }

    /// `max |X(t, Y(t, x)) - x|` over the levels with an inverse map.
    pub fn composition_defect(&self) -> f64 {
        let grid = *self.grid();
        let dim = grid.dim();
        let n = grid.npoints();
        self.inverse_displacement
            .par_iter()
            .map(|(k, ydisp)| {
                let xdisp = &self.displacement[*k];
                (0..n)
                    .map(|p| {
                        let x0 = grid.point(p);
                        let mut y = [0.0; 3];
                        for d in 0..dim {
                            y[d] = x0[d] + ydisp.component_values(d)[p];
                        }
                        let mut back = [0.0; 3];
                        interp::sample_field(xdisp, &y[..dim], &mut back[..dim]);
                        (0..dim).map(|d| (y[d] + back[d] - x0[d]).abs()).fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `f(X(t_k, y))` on the grid of `y`.
    pub fn pull_back(&self, k: usize, f: &SpectralField) -> SpectralField {
        interp::compose(f, &self.displacement[k])
    }
}
