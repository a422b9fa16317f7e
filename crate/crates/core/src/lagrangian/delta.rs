//! Differences of two Lagrangian solutions: the series identity for
//! `delta A` and pointwise evaluators of the source terms of the difference
//! system.
//!
//! With `delta = (.)_1 - (.)_2`, the difference system reads
//! `d_t dv - nu Lap dv + grad dP = b0 (nu Lap dv - grad dP) + f1 + f2 + f3`,
//! `d_t dw = f4 + f5`, `d_t dh - gamma Lap dh = f6 + f7 + f8`,
//! `div dv = g`, `d_t g = div R`. Each source is the exact difference of the
//! corresponding Lagrangian operator, split as in the uniqueness argument.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{self, mat_identity, mat_mul, mat_transpose, mat_vec, neumann_inverse, neumann_partial_sum, NeumannInverse};
use super::transform::{a_colon_grad, frob2, gram, lagrangian_grad, LagrangianState};
use crate::duhamel::TimeSeriesField;
use crate::error::{Error, Result};
use crate::spectral::{divergence, gradient, SpectralField};

/// `C(t_k) = int_0^{t_k} D_y v ds` by the trapezoid rule.
pub fn accumulated_gradient(v: &TimeSeriesField) -> Vec<SpectralField> {
    let dv: Vec<SpectralField> = v.fields().par_iter().map(gradient).collect();
    let t = v.times();
    let mut out = Vec::with_capacity(t.len());
    out.push(SpectralField::zeros(*v.grid(), dv[0].components()));
    for k in 1..t.len() {
        let h = t[k] - t[k - 1];
        let next = out[k - 1].axpy(0.5 * h, &dv[k - 1]).axpy(0.5 * h, &dv[k]);
        out.push(next);
    }
    out
}

/// `A(t) = sum_{k >= 0} (-C(t))^k` for a Lagrangian velocity history.
pub fn neumann_a(v: &TimeSeriesField) -> Result<Vec<NeumannInverse>> {
    accumulated_gradient(v)
        .par_iter()
        .map(|c| neumann_inverse(c, super::flow::NEUMANN_TOL, super::flow::NEUMANN_MAX_TERMS))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaAReport {
    /// `max |series - (A_1 - A_2)|` over points and levels.
    pub max_discrepancy: f64,
    /// `max |A_1 - A_2|`.
    pub max_delta_a: f64,
    /// Truncation order used (matched for both series).
    pub max_terms: usize,
}

/// `sum_{k=1}^{K} (-1)^k sum_{j<k} C1^j D C2^{k-1-j}` pointwise, from
/// precomputed powers.
fn double_sum(c1: &SpectralField, c2: &SpectralField, delta: &SpectralField, order: usize) -> SpectralField {
    let grid = *c1.grid();
    let dim = grid.dim();
    matrix::build(grid, dim, dim, |p| {
        let a = matrix::load(c1, dim, p);
        let b = matrix::load(c2, dim, p);
        let d = matrix::load(delta, dim, p);
        let mut pa = vec![matrix::identity(dim)];
        let mut pb = vec![matrix::identity(dim)];
        for k in 1..order {
            pa.push(matrix::mul(&pa[k - 1], &a, dim));
            pb.push(matrix::mul(&pb[k - 1], &b, dim));
        }
        let mut acc = [0.0; 9];
        for k in 1..=order {
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            for j in 0..k {
                let term = matrix::mul(&matrix::mul(&pa[j], &d, dim), &pb[k - 1 - j], dim);
                acc = matrix::add(&acc, &term, sign);
            }
        }
        acc
    })
}

/// Compares `A_1 - A_2` with the double-sum identity in `int D delta v`.
/// Both Neumann sums are truncated at the larger of their converged orders,
/// so the comparison isolates the algebra from the truncation.
pub fn delta_a_identity(v1: &TimeSeriesField, v2: &TimeSeriesField) -> Result<DeltaAReport> {
    if v1.times() != v2.times() {
        return Err(Error::TimeGridMismatch("velocity histories must share one time grid".into()));
    }
    let c1 = accumulated_gradient(v1);
    let c2 = accumulated_gradient(v2);
    let dv = v1.combine(1.0, v2, -1.0)?;
    let cd = accumulated_gradient(&dv);
    let per = (0..c1.len())
        .into_par_iter()
        .map(|k| {
            let n1 = neumann_inverse(&c1[k], super::flow::NEUMANN_TOL, super::flow::NEUMANN_MAX_TERMS)?;
            let n2 = neumann_inverse(&c2[k], super::flow::NEUMANN_TOL, super::flow::NEUMANN_MAX_TERMS)?;
            let order = n1.terms.max(n2.terms);
            let direct = neumann_partial_sum(&c1[k], order).sub(&neumann_partial_sum(&c2[k], order));
            let series = double_sum(&c1[k], &c2[k], &cd[k], order);
            Ok((series.max_abs_diff(&direct), direct.linf_norm_entries(), order))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeltaAReport {
        max_discrepancy: per.iter().map(|v| v.0).fold(0.0, f64::max),
        max_delta_a: per.iter().map(|v| v.1).fold(0.0, f64::max),
        max_terms: per.iter().map(|v| v.2).max().unwrap_or(0),
    })
}

trait EntryMax {
    fn linf_norm_entries(&self) -> f64;
}

impl EntryMax for SpectralField {
    fn linf_norm_entries(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Source terms of the difference system at one interior level.
#[derive(Clone, Debug)]
pub struct DeltaSources {
    pub f: [SpectralField; 8],
    pub g: SpectralField,
    pub r: SpectralField,
}

fn scale_by(s: &SpectralField, f: &SpectralField) -> SpectralField {
    let n = s.grid().npoints();
    let sv = s.values();
    let mut values = f.values().to_vec();
    for (i, v) in values.iter_mut().enumerate() {
        *v *= sv[i % n];
    }
    SpectralField::from_values(*f.grid(), f.components(), values).expect("finite")
}

fn trace(m: &SpectralField) -> SpectralField {
    let dim = m.grid().dim();
    let mut acc = m.component(0);
    for i in 1..dim {
        acc = acc.add(&m.component(i * dim + i));
    }
    acc
}

/// `div_y(M grad_y g)` for every component of `g`.
fn lap_with(m: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    let parts = (0..g.components()).map(|c| divergence(&mat_vec(m, &gradient(&g.component(c))))).collect::<Result<Vec<_>>>()?;
    SpectralField::stack(&parts.iter().collect::<Vec<_>>())
}

/// `2 (h : d_x h) omega + |h|^2 h` with `d_x = A^T grad_y`.
fn h_nonlinear(a: &SpectralField, h: &SpectralField, omega: &SpectralField) -> SpectralField {
    let grid = *a.grid();
    let dim = grid.dim();
    let n = grid.npoints();
    let gh = gradient(h);
    let (av, gv, hv, ov) = (a.values(), gh.values(), h.values(), omega.values());
    matrix::build(grid, dim, dim, |p| {
        let h2: f64 = (0..dim * dim).map(|e| hv[e * n + p].powi(2)).sum();
        let mut out = [0.0; 9];
        for c in 0..dim {
            for j in 0..dim {
                let quad: f64 = (0..dim * dim)
                    .map(|kl| hv[kl * n + p] * (0..dim).map(|m| av[(m * dim + j) * n + p] * gv[(kl * dim + m) * n + p]).sum::<f64>())
                    .sum();
                out[c * dim + j] = 2.0 * quad * ov[c * n + p] + h2 * hv[(c * dim + j) * n + p];
            }
        }
        out
    })
}

/// Evaluates `f1..f8, g, R` at interior level `k` (`R` by a centered time
/// difference). `b` is taken from the first state.
pub fn delta_sources(l1: &LagrangianState, l2: &LagrangianState, k: usize) -> Result<DeltaSources> {
    if l1.times != l2.times {
        return Err(Error::TimeGridMismatch("states must share one time grid".into()));
    }
    if k == 0 || k + 1 >= l1.times.len() {
        return Err(Error::InvalidIndex(format!("level {k} is not interior")));
    }
    let c = l1.constants;
    let grid = *l1.v[k].grid();
    let id = mat_identity(grid);
    let (a1, a2) = (&l1.a[k], &l2.a[k]);
    let da = a1.sub(a2);
    let (v1, v2) = (&l1.v[k], &l2.v[k]);
    let dv = v1.sub(v2);
    let dp = l1.p[k].sub(&l2.p[k]);
    let h1 = mat_mul(&gradient(&l1.omega[k]), a1);
    let h2 = mat_mul(&gradient(&l2.omega[k]), a2);
    let dh = h1.sub(&h2);
    let (w1, w2) = (&l1.omega[k], &l2.omega[k]);
    let dw = w1.sub(w2);
    let one_b = l1.b[k].map_points(1, |x, o| o[0] = 1.0 + x[0]);
    let (dv1, dv2, ddv) = (gradient(v1), gradient(v2), gradient(&dv));
    let aat1 = mat_mul(a1, &mat_transpose(a1));
    let aat2 = mat_mul(a2, &mat_transpose(a2));

    // f1 = (1 + b)[(I - A2^T) grad dP - dA^T grad P1]
    let f1 = scale_by(&one_b, &gradient(&dp).sub(&lagrangian_grad(a2, &dp)).sub(&lagrangian_grad(&da, &l1.p[k])));
    // f2 = nu (1 + b) rowdiv{D dv (A2 A2^T - I) + D v1 (A1 A1^T - A2 A2^T)}
    let inner = mat_mul(&ddv, &aat2.sub(&id)).add(&mat_mul(&dv1, &aat1.sub(&aat2)));
    let f2 = scale_by(&one_b, &divergence(&inner)?).scale(c.nu);
    // f3 = -lambda rowdiv{h2^T h2 dA^T + (dh^T h2 + h1^T dh) A1^T}
    let s_diff = mat_mul(&mat_transpose(&dh), &h2).add(&mat_mul(&mat_transpose(&h1), &dh));
    let f3 = divergence(&mat_mul(&gram(&h2), &mat_transpose(&da)).add(&mat_mul(&s_diff, &mat_transpose(a1))))?.scale(-c.lambda);
    // f4 = gamma[(dh : h2 + h1 : dh) w2 + |h1|^2 dw]
    let contr = dh.zip_points(&h2, 1, |x, y, o| o[0] = x.iter().zip(y).map(|(a, b)| a * b).sum())
        .add(&h1.zip_points(&dh, 1, |x, y, o| o[0] = x.iter().zip(y).map(|(a, b)| a * b).sum()));
    let f4 = scale_by(&contr, w2).add(&scale_by(&frob2(&h1), &dw)).scale(c.gamma);
    // f5 = gamma[dA^T : grad h2 + A1^T : grad dh]
    let f5 = a_colon_grad(&da, &h2).add(&a_colon_grad(a1, &dh)).scale(c.gamma);
    // f6 = -[h2 (D v2 dA + D dv A1) + dh D v1 A1]
    let dk = mat_mul(&dv2, &da).add(&mat_mul(&ddv, a1));
    let f6 = mat_mul(&h2, &dk).add(&mat_mul(&dh, &mat_mul(&dv1, a1))).scale(-1.0);
    // f7 = gamma[div((A2 A2^T - I) grad dh) + div((A1 A1^T - A2 A2^T) grad h1)]
    let f7 = lap_with(&aat2.sub(&id), &dh)?.add(&lap_with(&aat1.sub(&aat2), &h1)?).scale(c.gamma);
    // f8 = gamma[N(h1, w1) - N(h2, w2)]
    let f8 = h_nonlinear(a1, &h1, w1).sub(&h_nonlinear(a2, &h2, w2)).scale(c.gamma);
    // g = tr(D dv (I - A2)) - tr(D v1 dA)
    let g = trace(&mat_mul(&ddv, &id.sub(a2))).sub(&trace(&mat_mul(&dv1, &da)));
    // R = d_t[(I - A2) dv - dA v1]
    let q = |j: usize| {
        let dvj = l1.v[j].sub(&l2.v[j]);
        let daj = l1.a[j].sub(&l2.a[j]);
        mat_vec(&id.sub(&l2.a[j]), &dvj).sub(&mat_vec(&daj, &l1.v[j]))
    };
    let dt = l1.times[k + 1] - l1.times[k - 1];
    let r = q(k + 1).sub(&q(k - 1)).scale(1.0 / dt);
    Ok(DeltaSources { f: [f1, f2, f3, f4, f5, f6, f7, f8], g, r })
}
