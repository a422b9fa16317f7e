//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use lcflow::besov::{besov_norm, heat_characterization_norm, BesovIndex, TimeGrid};
use lcflow::diagnostics::{energy_increase, energy_report, scaling_check};
use lcflow::duhamel::{random_family, weighted_bound_report, Lemma, LemmaParams, TimeSeriesField};
use lcflow::lagrangian::{
    delta_a_identity, flow_map, to_lagrangian, velocity_gradient_discrepancy, InverseSource,
};
use lcflow::scenarios::{mixture_step_density, random_small, stationary_director, taylor_green};
use lcflow::solver::{default_test_functions, picard_solve, weak_form_residual, x_norm_ledger, PicardOutcome, SchemeConfig, Trajectory};
use lcflow::spectral::gradient;
use lcflow::{Grid, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

struct Run {
    config: SchemeConfig,
    outcome: PicardOutcome,
    elapsed: Duration,
}

fn solve(s: &lcflow::scenarios::Scenario, config: SchemeConfig) -> Run {
    let t0 = Instant::now();
    let outcome = picard_solve(&s.a0, &s.u0, &s.d0, s.constants, &config).unwrap_or_else(|e| panic!("{}: {e}", s.name));
    Run { config, outcome, elapsed: t0.elapsed() }
}

fn grid(m: usize) -> Grid {
    Grid::periodic(2, m).unwrap()
}

fn stationary_run() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| {
        // O(1) data on purpose: the smallness check is overridden
        let cfg = SchemeConfig { t_end: 1.0, dt: Some(1.0 / 256.0), tol: 1e-10, warn_only: true, ..Default::default() };
        solve(&stationary_director(grid(64), 1), cfg)
    })
}

fn tg_config(steps: usize) -> SchemeConfig {
    SchemeConfig { t_end: 0.5, dt: Some(0.5 / steps as f64), tol: 1e-10, warn_only: true, ..Default::default() }
}

fn tg_run(m: usize) -> &'static Run {
    static R64: OnceLock<Run> = OnceLock::new();
    static R128: OnceLock<Run> = OnceLock::new();
    let cell = if m == 64 { &R64 } else { &R128 };
    cell.get_or_init(|| solve(&taylor_green(grid(m), 1.0), tg_config(256)))
}

fn mixture_run() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| solve(&mixture_step_density(grid(64)), SchemeConfig { t_end: 0.5, ..Default::default() }))
}

const SMALL_T: f64 = 0.25;

fn small_config(steps: usize) -> SchemeConfig {
    SchemeConfig { t_end: SMALL_T, dt: Some(SMALL_T / steps as f64), tol: 1e-12, ..Default::default() }
}

fn small_run(eta: f64, steps: usize) -> Run {
    let cfg = small_config(steps);
    let s = random_small(grid(64), eta, 1, &cfg).unwrap();
    solve(&s, cfg)
}

fn small_runs() -> &'static [(f64, Run)] {
    static R: OnceLock<Vec<(f64, Run)>> = OnceLock::new();
    R.get_or_init(|| [0.005, 0.01, 0.02].into_iter().map(|eta| (eta, small_run(eta, 64))).collect())
}

fn max_weak(traj: &Trajectory) -> Check {
    let tests = default_test_functions(traj.grid(), traj.t_end);
    let w = weak_form_residual(traj, &tests).map_err(err)?;
    Ok((true, format!("{:e}", w.iter().map(|r| r.max_abs()).fold(0.0, f64::max))))
}

fn weak_value(traj: &Trajectory) -> std::result::Result<f64, String> {
    max_weak(traj)?.1.parse::<f64>().map_err(err)
}

fn relative_drift(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
}

fn c1_stationary_director() -> Check {
    let run = stationary_run();
    let traj = &run.outcome.trajectory;
    let d0 = &traj.snapshots()[0].d;
    let dd = traj.snapshots().iter().map(|s| s.d.max_abs_diff(d0)).fold(0.0, f64::max);
    let uu = traj.snapshots().iter().map(|s| s.u.linf_norm()).fold(0.0, f64::max);
    let secs = run.elapsed.as_secs_f64();
    let ok = dd <= 1e-6 && uu <= 1e-8 && secs <= 120.0 && run.outcome.converged();
    Ok((ok, format!("max|d-d0| = {dd:.3e}, max|u| = {uu:.3e}, runtime {secs:.1} s")))
}

fn c2_taylor_green() -> Check {
    let run = tg_run(64);
    let traj = &run.outcome.trajectory;
    let nu = traj.constants().nu;
    let u0 = &traj.snapshots()[0].u;
    let mut rel = 0.0f64;
    for s in traj.snapshots() {
        let exact = u0.scale((-2.0 * nu * s.time).exp());
        rel = rel.max(s.u.sub(&exact).l2_norm() / exact.l2_norm());
    }
    let rows = energy_report(traj).map_err(err)?;
    let e0 = rows[0].energy;
    let erel = rows.iter().map(|r| (r.energy - e0 * (-4.0 * nu * r.time).exp()).abs() / e0).fold(0.0, f64::max);
    Ok((rel <= 1e-6 && erel <= 1e-5, format!("velocity L2 rel err {rel:.3e}, energy rel err {erel:.3e}")))
}

/// Band-limited mean-zero field with random amplitudes on `|k_i| <= 6`,
/// defined independently of the grid.
fn random_band_limited(seed: u64) -> impl Fn(&[f64], &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            let mut k = (0.0, 0.0);
            while k == (0.0, 0.0) {
                k = (rng.gen_range(-6..=6) as f64, rng.gen_range(-6..=6) as f64);
            }
            (k.0, k.1, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    move |x, o| o[0] = modes.iter().map(|m| m.2 * (m.0 * x[0] + m.1 * x[1] + m.3).cos()).sum()
}

fn c3_besov_heat() -> Check {
    let indices = [(-0.5, 2.0, 2.0), (-1.0, 4.0, f64::INFINITY), (-0.25, 1.5, 1.0)];
    let mut spreads = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for m in [64, 128] {
        let g = grid(m);
        let tg = TimeGrid::for_grid(&g);
        let mut fields: Vec<SpectralField> = (0..20).map(|i| SpectralField::from_fn(g, 1, random_band_limited(100 + i))).collect();
        for q in 1..=4 {
            let k = 2f64.powi(q);
            fields.push(SpectralField::from_fn(g, 1, |x, o| o[0] = (k * x[0]).cos()));
        }
        for &(s, p, r) in &indices {
            let idx = BesovIndex::new(s, p, r).map_err(err)?;
            let ratios = fields
                .iter()
                .map(|f| Ok(heat_characterization_norm(f, idx, &tg)? / besov_norm(f, idx)?))
                .collect::<lcflow::Result<Vec<f64>>>()
                .map_err(err)?;
            let (a, b) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            lo = lo.min(a);
            hi = hi.max(b);
            spreads.push(b / a);
        }
    }
    let n = indices.len();
    let drift = (0..n).map(|i| relative_drift(spreads[i], spreads[i + n])).fold(0.0, f64::max);
    Ok((lo >= 0.1 && hi <= 10.0 && drift < 0.2, format!("ratio in [{lo:.3}, {hi:.3}], spread drift {:.1}%", 100.0 * drift)))
}

fn c4_duhamel_bounds() -> Check {
    let mut cases: Vec<(String, Lemma, LemmaParams)> = Vec::new();
    for (p, q) in [(2.0, 2.0), (4.0 / 3.0, 4.0), (3.0, 1.5)] {
        let params = LemmaParams { r1: p, q1: q, ..Lemma::MaxRegularity.default_params(2) };
        cases.push((format!("2.2 (p,q)=({p:.3},{q:.3})"), Lemma::MaxRegularity, params));
    }
    for l in Lemma::ALL.into_iter().skip(1) {
        cases.push((l.label().to_string(), l, l.default_params(2)));
    }
    let mut worst_drift = 0.0f64;
    let mut worst = String::new();
    let mut finite = true;
    let fam = |m: usize, k: usize| random_family(grid(m), 1.0, k, 1, 50, 2024);
    let (f1, f2) = (fam(16, 32).map_err(err)?, fam(32, 64).map_err(err)?);
    for (name, lemma, params) in &cases {
        let a = weighted_bound_report(*lemma, params, &f1).map_err(err)?;
        let b = weighted_bound_report(*lemma, params, &f2).map_err(err)?;
        finite &= a.all_finite() && b.all_finite() && a.max_ratio() > 0.0;
        let d = relative_drift(a.max_ratio(), b.max_ratio());
        if d >= worst_drift {
            worst_drift = d;
            worst = name.clone();
        }
    }
    Ok((finite && worst_drift < 0.2, format!("{} cases, all finite: {finite}, worst drift {:.1}% ({worst})", cases.len(), 100.0 * worst_drift)))
}

fn c5_contraction() -> Check {
    let mut worst_ratio = 0.0f64;
    let mut ks = Vec::new();
    for (eta, run) in small_runs() {
        if !run.outcome.converged() {
            return Ok((false, format!("eta = {eta} did not converge")));
        }
        for (n, r) in run.outcome.contraction_ratios() {
            if n >= 2 {
                worst_ratio = worst_ratio.max(r);
            }
        }
        let total = x_norm_ledger(&run.outcome.trajectory, run.config.r).map_err(err)?.total;
        ks.push(total / run.outcome.eta);
    }
    let (kmin, kmax) = ks.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let drift = (kmax - kmin) / kmin;
    Ok((
        worst_ratio <= 0.5 && drift < 0.2,
        format!("max ratio (n >= 2) {worst_ratio:.3e}, K_obs {ks:.4?}, drift {:.2}%", 100.0 * drift),
    ))
}

fn c6_max_principle() -> Check {
    let run = mixture_run();
    let a0 = run.outcome.trajectory.snapshots()[0].a.linf_norm();
    let traj_max = run.outcome.trajectory.snapshots().iter().map(|s| s.a.linf_norm()).fold(0.0, f64::max);
    let iter_max = run.outcome.reports.iter().map(|r| r.a_max).fold(0.0, f64::max);
    Ok((
        traj_max <= a0 && iter_max <= a0,
        format!("||a0|| = {a0:.6e}, max over t {traj_max:.6e}, max over iterates {iter_max:.6e}"),
    ))
}

fn c7_lagrangian() -> Check {
    let mut disc = Vec::new();
    let mut series_defect = 0.0f64;
    let mut vol = 0.0f64;
    for m in [64, 128] {
        let traj = &tg_run(m).outcome.trajectory;
        let fm = flow_map(&traj.u_series(), 16).map_err(err)?;
        if !fm.a_source.iter().all(|s| matches!(s, InverseSource::Neumann { .. })) {
            return Ok((false, "Taylor-Green flow left the Neumann regime".into()));
        }
        series_defect = series_defect.max(fm.inverse_defect());
        vol = vol.max(fm.volume_defect());
        let lag = to_lagrangian(traj, &fm).map_err(err)?;
        disc.push(velocity_gradient_discrepancy(traj, &fm, &lag));
    }
    // steady Taylor-Green with a large amplitude forces the direct inverse
    let g = grid(32);
    let big = taylor_green(g, 4.0).u0;
    let fm = flow_map(&TimeSeriesField::sample(0.5, 64, |_| big.clone()).map_err(err)?, 16).map_err(err)?;
    let direct_ok = matches!(fm.a_source.last(), Some(InverseSource::Direct));
    let direct_defect = fm.inverse_defect();
    // random small velocity pairs
    let mut delta_a = 0.0f64;
    for seed in 0..5 {
        let fam = random_family(grid(16), 1.0, 16, 2, 2, 77 + seed).map_err(err)?;
        let small: Vec<TimeSeriesField> = fam
            .iter()
            .map(|v| {
                let lip = v.fields().iter().map(|f| gradient(f).linf_norm()).fold(0.0, f64::max);
                v.map(|f| f.scale(0.3 / lip))
            })
            .collect::<lcflow::Result<_>>()
            .map_err(err)?;
        delta_a = delta_a.max(delta_a_identity(&small[0], &small[1]).map_err(err)?.max_discrepancy);
    }
    let ok = disc[0] <= 1e-3
        && disc[1] <= 0.5 * disc[0]
        && series_defect <= 1e-8
        && direct_ok
        && direct_defect <= 1e-10
        && vol <= 1e-4
        && delta_a <= 1e-9;
    Ok((
        ok,
        format!(
            "grad u discrepancy {:.3e} (M=64) {:.3e} (M=128); |A DX - I| series {series_defect:.1e} direct {direct_defect:.1e}; |det - 1| {vol:.1e}; delta A {delta_a:.1e}",
            disc[0], disc[1]
        ),
    ))
}

fn c8_scaling() -> Check {
    let run = stationary_run();
    let rep = scaling_check(&run.outcome.trajectory, 1, run.config.p_for(2), run.config.r).map_err(err)?;
    Ok((
        rep.residuals_agree() && rep.eta_drift() <= 0.05,
        format!(
            "weak residual {:.3e} -> {:.3e}, eta {:.6e} -> {:.6e} ({:.2e} rel)",
            rep.residual,
            rep.residual_rescaled,
            rep.eta,
            rep.eta_rescaled,
            rep.eta_drift()
        ),
    ))
}

fn c9_energy_law() -> Check {
    let s = taylor_green(grid(64), 1.0);
    let mut res = Vec::new();
    for steps in [64, 128] {
        let run = solve(&s, tg_config(steps));
        res.push(energy_report(&run.outcome.trajectory).map_err(err)?.iter().map(|r| r.residual).fold(0.0, f64::max));
    }
    res.push(energy_report(&tg_run(64).outcome.trajectory).map_err(err)?.iter().map(|r| r.residual).fold(0.0, f64::max));
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let mut runs: Vec<(&str, &Trajectory)> = vec![
        ("stationary", &stationary_run().outcome.trajectory),
        ("taylor-green", &tg_run(64).outcome.trajectory),
        ("mixture", &mixture_run().outcome.trajectory),
    ];
    for (_, r) in small_runs() {
        runs.push(("random_small", &r.outcome.trajectory));
    }
    let mut inc = 0.0f64;
    for (_, t) in &runs {
        inc = inc.max(energy_increase(&energy_report(t).map_err(err)?));
    }
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        min_order >= 1.8 && inc <= 1e-8,
        format!("residuals {:?}, orders {orders:.2?}, max energy increase {inc:.1e} over {} runs", res.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(), runs.len()),
    ))
}

fn c10_weak_form() -> Check {
    let sd = weak_value(&stationary_run().outcome.trajectory)?;
    let tg = weak_value(&tg_run(64).outcome.trajectory)?;
    let eta = 0.01;
    let mut values: Vec<Vec<f64>> = Vec::new();
    let r64 = &small_runs().iter().find(|(e, _)| *e == eta).unwrap().1;
    let tests = default_test_functions(&grid(64), SMALL_T);
    let flat = |t: &Trajectory| -> std::result::Result<Vec<f64>, String> {
        Ok(weak_form_residual(t, &tests).map_err(err)?.iter().flat_map(|w| w.values()).collect())
    };
    values.push(flat(&r64.outcome.trajectory)?);
    for steps in [128, 256] {
        values.push(flat(&small_run(eta, steps).outcome.trajectory)?);
    }
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d1 = diff(&values[0], &values[1]);
    let d2 = diff(&values[1], &values[2]);
    let order = (d1 / d2).log2();
    Ok((
        sd <= 1e-5 && tg <= 1e-5 && order >= 1.8,
        format!("stationary {sd:.2e}, taylor-green {tg:.2e}; random_small differences {d1:.2e}, {d2:.2e}, order {order:.2}"),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("stationary director", c1_stationary_director),
        ("Taylor-Green decay", c2_taylor_green),
        ("Besov / heat-semigroup equivalence", c3_besov_heat),
        ("Duhamel operator bounds", c4_duhamel_bounds),
        ("Picard contraction", c5_contraction),
        ("maximum principle for a", c6_max_principle),
        ("Lagrangian identities", c7_lagrangian),
        ("scaling covariance", c8_scaling),
        ("energy law", c9_energy_law),
        ("weak-form residuals", c10_weak_form),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = match std::panic::catch_unwind(f) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!("{} criterion {:>2} {name}: {detail} [{:.1} s]", if ok { "PASS" } else { "FAIL" }, i + 1, t0.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
