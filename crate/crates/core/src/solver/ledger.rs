//! Itemized space-time norms of a trajectory and the Picard increment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::duhamel::{weighted_time_norm, TimeSeriesField, WeightedExponentTable};
use crate::error::{Error, Result};
use crate::spectral::{gradient, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedgerKind {
    /// Unweighted norms, plus the `L^2 L^inf` term.
    X,
    /// Time-weighted norms.
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormLedger {
    pub kind: LedgerKind,
    pub items: Vec<(String, f64)>,
    pub total: f64,
}

impl NormLedger {
    fn from_items(kind: LedgerKind, items: Vec<(String, f64)>) -> Self {
        let total = items.iter().map(|(_, v)| v).sum();
        Self { kind, items, total }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.items.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Which stacked quantity an item measures.
#[derive(Clone, Copy)]
enum Quantity {
    /// `grad d`
    GradD,
    /// `(u, grad d)`
    UGradD,
    /// `grad(u, grad d)`
    Gradients,
    /// `(grad^2 u, grad^3 d, grad Pi)`
    Top,
    /// `(grad^2 u, grad Pi)`
    TopNoD,
}

struct Item {
    name: String,
    what: Quantity,
    weight: f64,
    space: f64,
    time: f64,
}

/// Spatial norms of every requested quantity at one time level.
fn level_norms(u: &SpectralField, d: &SpectralField, gpi: &SpectralField, items: &[Item]) -> Result<Vec<f64>> {
    let gd = gradient(d);
    let need_grad = items.iter().any(|i| matches!(i.what, Quantity::Gradients | Quantity::Top | Quantity::TopNoD));
    let need_top = items.iter().any(|i| matches!(i.what, Quantity::Top | Quantity::TopNoD));
    let (gu, ggd) = if need_grad { (Some(gradient(u)), Some(gradient(&gd))) } else { (None, None) };
    let (ggu, gggd) = if need_top {
        (Some(gradient(gu.as_ref().expect("computed"))), Some(gradient(ggd.as_ref().expect("computed"))))
    } else {
        (None, None)
    };
    items
        .iter()
        .map(|item| {
            let field = match item.what {
                Quantity::GradD => gd.clone(),
                Quantity::UGradD => SpectralField::stack(&[u, &gd])?,
                Quantity::Gradients => SpectralField::stack(&[gu.as_ref().expect("computed"), ggd.as_ref().expect("computed")])?,
                Quantity::Top => SpectralField::stack(&[ggu.as_ref().expect("computed"), gggd.as_ref().expect("computed"), gpi])?,
                Quantity::TopNoD => SpectralField::stack(&[ggu.as_ref().expect("computed"), gpi])?,
            };
            Ok(field.lp_norm(item.space))
        })
        .collect()
}

fn evaluate(kind: LedgerKind, u: &TimeSeriesField, d: &TimeSeriesField, gpi: &TimeSeriesField, items: Vec<Item>) -> Result<NormLedger> {
    if u.times() != d.times() || u.times() != gpi.times() {
        return Err(Error::TimeGridMismatch("ledger inputs must share one time grid".into()));
    }
    let per_level = (0..u.len())
        .into_par_iter()
        .map(|k| level_norms(&u.fields()[k], &d.fields()[k], &gpi.fields()[k], &items))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(items.len());
    for (j, item) in items.iter().enumerate() {
        let norms: Vec<f64> = per_level.iter().map(|v| v[j]).collect();
        let value = weighted_time_norm(u.times(), &norms, item.weight, item.time)?;
        if !value.is_finite() {
            return Err(Error::InvalidIndex(format!("ledger item {} is not finite", item.name)));
        }
        out.push((item.name.clone(), value));
    }
    Ok(NormLedger::from_items(kind, out))
}

fn x_items(dim: usize, r: f64) -> Result<Vec<Item>> {
    if !(r > 1.0 && r < 2.0) {
        return Err(Error::InvalidIndex(format!("the unweighted ledger needs 1 < r < 2, got r = {r}")));
    }
    let n = dim as f64;
    let it = |name: &str, what, space: f64, time: f64| Item { name: name.into(), what, weight: 0.0, space, time };
    Ok(vec![
        it("grad d in L^{3r} L^{3Nr/(3r-2)}", Quantity::GradD, 3.0 * n * r / (3.0 * r - 2.0), 3.0 * r),
        it("grad(u, grad d) in L^{2r} L^{Nr/(2r-1)}", Quantity::Gradients, n * r / (2.0 * r - 1.0), 2.0 * r),
        it("grad(u, grad d) in L^r L^{Nr/(2(r-1))}", Quantity::Gradients, n * r / (2.0 * (r - 1.0)), r),
        it("(u, grad d) in L^{2r} L^{Nr/(r-1)}", Quantity::UGradD, n * r / (r - 1.0), 2.0 * r),
        it("(grad^2 u, grad^3 d, grad Pi) in L^r L^{Nr/(3r-2)}", Quantity::Top, n * r / (3.0 * r - 2.0), r),
        it("(u, grad d) in L^2 L^inf", Quantity::UGradD, f64::INFINITY, 2.0),
    ])
}

fn y_items(t: &WeightedExponentTable) -> Vec<Item> {
    let r = t.r;
    let inf = f64::INFINITY;
    let it = |name: &str, what, weight: f64, space: f64, time: f64| Item { name: name.into(), what, weight, space, time };
    vec![
        it("t^beta1 grad(u, grad d) in L^{2r} L^{p2}", Quantity::Gradients, t.beta1, t.p2, 2.0 * r),
        it("t^beta2 grad(u, grad d) in L^inf L^{p2}", Quantity::Gradients, t.beta2, t.p2, inf),
        it("t^beta3 grad(u, grad d) in L^{2r} L^{p3/2}", Quantity::Gradients, t.beta3, t.p3 / 2.0, 2.0 * r),
        it("t^beta4 grad(u, grad d) in L^inf L^{p3/2}", Quantity::Gradients, t.beta4, t.p3 / 2.0, inf),
        it("t^gamma1 (u, grad d) in L^{2r} L^{p3}", Quantity::UGradD, t.gamma1, t.p3, 2.0 * r),
        it("t^gamma2 (u, grad d) in L^inf L^{p3}", Quantity::UGradD, t.gamma2, t.p3, inf),
        it("t^gamma3 grad d in L^{2r} L^{3 p1}", Quantity::GradD, t.gamma3, 3.0 * t.p1, 2.0 * r),
        it("t^gamma4 grad d in L^inf L^{3 p1}", Quantity::GradD, t.gamma4, 3.0 * t.p1, inf),
        it("t^alpha1 (grad^2 u, grad Pi) in L^{2r} L^{p1}", Quantity::TopNoD, t.alpha1, t.p1, 2.0 * r),
        it("t^alpha2 (grad^2 u, grad^3 d, grad Pi) in L^r L^{p1}", Quantity::Top, t.alpha2, t.p1, r),
    ]
}

/// Unweighted ledger of `(u, grad d, grad Pi)` given as separate series.
pub fn x_norm_ledger_parts(u: &TimeSeriesField, d: &TimeSeriesField, gpi: &TimeSeriesField, r: f64) -> Result<NormLedger> {
    evaluate(LedgerKind::X, u, d, gpi, x_items(u.grid().dim(), r)?)
}

/// Unweighted norms of a trajectory, itemized, plus `||(u, grad d)||_{L^2 L^inf}`.
pub fn x_norm_ledger(traj: &Trajectory, r: f64) -> Result<NormLedger> {
    x_norm_ledger_parts(&traj.u_series(), &traj.d_series(), &traj.grad_pi_series(), r)
}

pub fn y_norm_ledger_parts(
    u: &TimeSeriesField,
    d: &TimeSeriesField,
    gpi: &TimeSeriesField,
    table: &WeightedExponentTable,
) -> Result<NormLedger> {
    if table.dim != u.grid().dim() {
        return Err(Error::InvalidIndex(format!("table built for N = {}, grid has N = {}", table.dim, u.grid().dim())));
    }
    evaluate(LedgerKind::Y, u, d, gpi, y_items(table))
}

/// Time-weighted norms of a trajectory, itemized.
pub fn y_norm_ledger(traj: &Trajectory, table: &WeightedExponentTable) -> Result<NormLedger> {
    y_norm_ledger_parts(&traj.u_series(), &traj.d_series(), &traj.grad_pi_series(), table)
}

/// Increment between consecutive iterates `(u, d, grad Pi)`: the sup of
/// `delta d` plus the unweighted ledger of the differences (`1 < r < 2`) or
/// the weighted ledger and the `L^2 L^inf` term (otherwise).
pub fn delta_u(
    prev: (&TimeSeriesField, &TimeSeriesField, &TimeSeriesField),
    next: (&TimeSeriesField, &TimeSeriesField, &TimeSeriesField),
    r: f64,
    table: Option<&WeightedExponentTable>,
) -> Result<(f64, Vec<(String, f64)>)> {
    let du = next.0.combine(1.0, prev.0, -1.0)?;
    let dd = next.1.combine(1.0, prev.1, -1.0)?;
    let dp = next.2.combine(1.0, prev.2, -1.0)?;
    let sup = dd.fields().iter().map(|f| f.linf_norm()).fold(0.0, f64::max);
    let mut parts = vec![("delta d in L^inf L^inf".to_string(), sup)];
    if r > 1.0 && r < 2.0 {
        parts.extend(x_norm_ledger_parts(&du, &dd, &dp, r)?.items);
    } else {
        let table = table.ok_or_else(|| Error::InvalidIndex(format!("r = {r} needs a weighted exponent table")))?;
        parts.extend(y_norm_ledger_parts(&du, &dd, &dp, table)?.items);
        let l2 = Item { name: "(u, grad d) in L^2 L^inf".into(), what: Quantity::UGradD, weight: 0.0, space: f64::INFINITY, time: 2.0 };
        parts.extend(evaluate(LedgerKind::X, &du, &dd, &dp, vec![l2])?.items);
    }
    let total = parts.iter().map(|(_, v)| v).sum();
    Ok((total, parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    /// `d = e^{-t}(cos x1, sin x1)` has `|grad^k d| = e^{-t}` pointwise for
    /// every `k >= 1`.
    fn decaying_director(steps: usize, t_end: f64) -> (TimeSeriesField, TimeSeriesField) {
        let g = Grid::periodic(2, 16).unwrap();
        let d = TimeSeriesField::sample(t_end, steps, |t| {
            SpectralField::from_fn(g, 2, |x, o| {
                o[0] = (-t).exp() * x[0].cos();
                o[1] = (-t).exp() * x[0].sin();
            })
        })
        .unwrap();
        let z = TimeSeriesField::sample(t_end, steps, |_| SpectralField::zeros(g, 2)).unwrap();
        (d, z)
    }

    fn exp_lr(s: f64, t_end: f64) -> f64 {
        ((1.0 - (-s * t_end).exp()) / s).powf(1.0 / s)
    }

    #[test]
    fn zero_trajectory_has_zero_ledger() {
        let g = Grid::periodic(2, 8).unwrap();
        let z = TimeSeriesField::sample(1.0, 4, |_| SpectralField::zeros(g, 2)).unwrap();
        let x = x_norm_ledger_parts(&z, &z, &z, 1.5).unwrap();
        assert!(x.items.iter().all(|(_, v)| *v == 0.0));
        let t = WeightedExponentTable::new(2, 1.5, 1.8, f64::INFINITY, 0.0).unwrap();
        assert_eq!(y_norm_ledger_parts(&z, &z, &z, &t).unwrap().total, 0.0);
    }

    #[test]
    fn single_mode_matches_closed_form() {
        let t_end = 1.0;
        let (d, z) = decaying_director(512, t_end);
        let r = 1.5;
        let ledger = x_norm_ledger_parts(&z, &d, &z, r).unwrap();
        let area = 4.0 * PI * PI;
        let n = 2.0;
        // Spatial L^q norm of a function with constant modulus c is c |T|^{1/q}.
        let expect = [
            exp_lr(3.0 * r, t_end) * area.powf((3.0 * r - 2.0) / (3.0 * n * r)),
            // grad(u, grad d) stacks two zero blocks with grad^2 d.
            exp_lr(2.0 * r, t_end) * area.powf((2.0 * r - 1.0) / (n * r)),
            exp_lr(r, t_end) * area.powf(2.0 * (r - 1.0) / (n * r)),
            exp_lr(2.0 * r, t_end) * area.powf((r - 1.0) / (n * r)),
            exp_lr(r, t_end) * area.powf((3.0 * r - 2.0) / (n * r)),
            exp_lr(2.0, t_end),
        ];
        for ((name, got), want) in ledger.items.iter().zip(expect) {
            assert!((got - want).abs() <= 1e-5 * want, "{name}: {got} vs {want}");
        }
        let sum: f64 = ledger.items.iter().map(|(_, v)| v).sum();
        assert!((ledger.total - sum).abs() <= 1e-12 * sum);
    }

    #[test]
    fn weighted_sup_items_match_closed_form() {
        // sup_t t^w e^{-t} is attained at t = w.
        let t_end = 2.0;
        let (d, z) = decaying_director(4096, t_end);
        let table = WeightedExponentTable::new(2, 2.5, 1.8, f64::INFINITY, 0.0).unwrap();
        let ledger = y_norm_ledger_parts(&z, &d, &z, &table).unwrap();
        let area = 4.0 * PI * PI;
        let g4 = table.gamma4;
        let want = g4.powf(g4) * (-g4).exp() * area.powf(1.0 / (3.0 * table.p1));
        let got = ledger.get("t^gamma4 grad d in L^inf L^{3 p1}").unwrap();
        assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn r_outside_window_is_rejected() {
        let g = Grid::periodic(2, 8).unwrap();
        let z = TimeSeriesField::sample(1.0, 4, |_| SpectralField::zeros(g, 2)).unwrap();
        assert!(x_norm_ledger_parts(&z, &z, &z, 2.0).is_err());
        assert!(delta_u((&z, &z, &z), (&z, &z, &z), 2.5, None).is_err());
    }
}
