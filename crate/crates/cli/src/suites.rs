//! Verification suites shared by `verify` subcommands. Each returns suite
//! results plus the CSV rows it produced.

use anyhow::Result;
use lcflow::besov::{besov_norm, heat_characterization_norm, BesovIndex, TimeGrid};
use lcflow::diagnostics::SuiteResult;
use lcflow::duhamel::{random_family, weighted_bound_report, Lemma, TimeSeriesField};
use lcflow::lagrangian::{
    delta_a_identity, flow_map, lagrangian_residuals, to_lagrangian, velocity_gradient_discrepancy, InverseSource,
};
use lcflow::scenarios::band_limited;
use lcflow::solver::Trajectory;
use lcflow::{Grid, SpectralField};

pub type Rows = Vec<Vec<String>>;

fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

fn drift(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
}

#[derive(Clone, Copy, Debug)]
pub struct DuhamelOptions {
    pub trials: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub dim: usize,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self { trials: 50, m: 16, k: 32, seed: 2024, dim: 2 }
    }
}

/// Max ratio over a random family at `(M, K)` and `(2M, 2K)`; passes when
/// every ratio is finite and the max drifts by less than 20%.
pub fn duhamel(lemmas: &[Lemma], o: &DuhamelOptions) -> Result<(Vec<SuiteResult>, Rows)> {
    let fam = |m: usize, k: usize| random_family(Grid::periodic(o.dim, m)?, 1.0, k, 1, o.trials, o.seed);
    let coarse = fam(o.m, o.k)?;
    let fine = fam(2 * o.m, 2 * o.k)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &lemma in lemmas {
        let params = lemma.default_params(o.dim);
        let a = weighted_bound_report(lemma, &params, &coarse)?;
        let b = weighted_bound_report(lemma, &params, &fine)?;
        for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
            rows.push(vec![lemma.label().into(), pa.pair.label.clone(), o.m.to_string(), o.k.to_string(), fmt(pa.max_ratio)]);
            rows.push(vec![lemma.label().into(), pb.pair.label.clone(), (2 * o.m).to_string(), (2 * o.k).to_string(), fmt(pb.max_ratio)]);
        }
        let d = drift(a.max_ratio(), b.max_ratio());
        let ok = a.all_finite() && b.all_finite() && d < 0.2;
        results.push(SuiteResult::new(
            format!("duhamel {}", lemma.label()),
            ok,
            vec![("max_ratio".into(), a.max_ratio()), ("max_ratio_refined".into(), b.max_ratio()), ("drift".into(), d)],
        ));
    }
    Ok((results, rows))
}

/// Heat-characterization over Besov norm on random band-limited fields and
/// single modes at `q = 1..4`, for `M` and `2M`.
pub fn besov(trials: usize, m: usize) -> Result<(SuiteResult, Rows)> {
    let indices = [(-0.5, 2.0, 2.0), (-1.0, 4.0, f64::INFINITY), (-0.25, 1.5, 1.0)];
    let mut rows = Vec::new();
    let mut spreads = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for mm in [m, 2 * m] {
        let g = Grid::periodic(2, mm)?;
        let tg = TimeGrid::for_grid(&g);
        let mut fields: Vec<SpectralField> = (0..trials as u64).map(|i| band_limited(g, 100 + i, 6, 12)).collect();
        for q in 1..=4 {
            let k = 2f64.powi(q) * g.base_frequency();
            fields.push(SpectralField::from_fn(g, 1, |x, o| o[0] = (k * x[0]).cos()));
        }
        for &(s, p, r) in &indices {
            let idx = BesovIndex::new(s, p, r)?;
            let mut a = f64::INFINITY;
            let mut b = 0.0f64;
            for f in &fields {
                let ratio = heat_characterization_norm(f, idx, &tg)? / besov_norm(f, idx)?;
                a = a.min(ratio);
                b = b.max(ratio);
            }
            rows.push(vec![mm.to_string(), fmt(s), fmt(p), fmt(r), fmt(a), fmt(b)]);
            lo = lo.min(a);
            hi = hi.max(b);
            spreads.push(b / a);
        }
    }
    let n = indices.len();
    let d = (0..n).map(|i| drift(spreads[i], spreads[i + n])).fold(0.0, f64::max);
    let ok = lo >= 0.1 && hi <= 10.0 && d < 0.2;
    Ok((SuiteResult::new("besov", ok, vec![("min_ratio".into(), lo), ("max_ratio".into(), hi), ("spread_drift".into(), d)]), rows))
}

/// Flow-map and pullback identities on a trajectory, plus the delta-A
/// identity on its velocity paired with the half-amplitude velocity.
pub fn lagrangian(traj: &Trajectory) -> Result<(SuiteResult, Rows)> {
    let u = traj.u_series();
    let fm = flow_map(&u, 16)?;
    let lag = to_lagrangian(traj, &fm)?;
    let neumann = fm.a_source.iter().all(|s| matches!(s, InverseSource::Neumann { .. }));
    let inv = fm.inverse_defect();
    let vol = fm.volume_defect();
    let comp = fm.composition_defect();
    let gu = velocity_gradient_discrepancy(traj, &fm, &lag);
    let hd = lag.h_discrepancy();
    let res = lagrangian_residuals(&lag)?;
    let v = TimeSeriesField::new(lag.times.clone(), lag.v.clone())?;
    let da = if neumann {
        let half = v.map(|f| f.scale(0.5))?;
        delta_a_identity(&v, &half)?.max_discrepancy
    } else {
        0.0
    };
    let inv_tol = if neumann { 1e-8 } else { 1e-10 };
    let ok = inv <= inv_tol && vol <= 1e-4 && gu <= 1e-3 && da <= 1e-9;
    let values: Vec<(String, f64)> = vec![
        ("inverse_defect".into(), inv),
        ("volume_defect".into(), vol),
        ("composition_defect".into(), comp),
        ("grad_u_discrepancy".into(), gu),
        ("h_discrepancy".into(), hd),
        ("transport_defect".into(), lag.transport_defect()),
        ("delta_a_discrepancy".into(), da),
        ("residual_momentum".into(), res.momentum),
        ("residual_director".into(), res.director),
        ("residual_divergence".into(), res.divergence),
        ("residual_h".into(), res.h_equation),
    ];
    let rows = values.iter().map(|(k, v)| vec![k.clone(), fmt(*v)]).collect();
    Ok((SuiteResult::new("lagrangian", ok, values), rows))
}
