//! End-to-end checks on small Picard solves.

use lcflow::diagnostics::{energy_increase, energy_report, rescale_trajectory, verify_trajectory, VerifyOptions};
use lcflow::lagrangian::{flow_map, lagrangian_residuals, to_lagrangian};
use lcflow::scenarios::{random_small, taylor_green};
use lcflow::solver::{default_test_functions, picard_solve, weak_form_residual, PicardOutcome, SchemeConfig};
use lcflow::Grid;

fn small_run(steps: usize) -> (PicardOutcome, SchemeConfig) {
    let cfg = SchemeConfig { t_end: 0.25, dt: Some(0.25 / steps as f64), tol: 1e-12, ..Default::default() };
    let s = random_small(Grid::periodic(2, 16).unwrap(), 0.01, 3, &cfg).unwrap();
    (picard_solve(&s.a0, &s.u0, &s.d0, s.constants, &cfg).unwrap(), cfg)
}

fn suite_value(v: &lcflow::diagnostics::Verdict, suite: &str, key: &str) -> f64 {
    let s = v.suites.iter().find(|s| s.name == suite).unwrap();
    s.values.iter().find(|(k, _)| k == key).unwrap().1
}

#[test]
fn small_data_run_passes_verification() {
    let mut weak = Vec::new();
    let mut law = Vec::new();
    for steps in [32, 64] {
        let (out, cfg) = small_run(steps);
        assert!(out.converged());
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        let rows = energy_report(&out.trajectory).unwrap();
        assert!(rows.iter().all(|r| r.energy >= 0.0 && r.dissipation >= 0.0));
        assert!(energy_increase(&rows) <= 1e-8);
        let opts = VerifyOptions { p: cfg.p_for(2), r: cfg.r, ..Default::default() };
        let verdict = verify_trajectory(&out.trajectory, &opts);
        for name in ["energy-monotone", "constraints", "scaling"] {
            assert!(verdict.suites.iter().any(|s| s.name == name && s.passed), "{}", verdict.render());
        }
        weak.push(suite_value(&verdict, "weak-form", "max_residual"));
        law.push(suite_value(&verdict, "energy-law", "relative_residual"));
    }
    // both residuals are second order in the time step
    assert!(weak[1] < 0.35 * weak[0], "{weak:?}");
    assert!(law[1] < 0.35 * law[0], "{law:?}");
}

#[test]
fn lagrangian_residuals_shrink_under_refinement() {
    let res: Vec<f64> = [16, 32]
        .into_iter()
        .map(|steps| {
            let traj = small_run(steps).0.trajectory;
            let fm = flow_map(&traj.u_series(), 8).unwrap();
            let lag = to_lagrangian(&traj, &fm).unwrap();
            let r = lagrangian_residuals(&lag).unwrap();
            r.momentum.max(r.director)
        })
        .collect();
    assert!(res[1] < 0.5 * res[0], "{res:?}");
}

#[test]
fn taylor_green_energy_decays_at_the_viscous_rate() {
    let g = Grid::periodic(2, 16).unwrap();
    let s = taylor_green(g, 1.0);
    let cfg = SchemeConfig { t_end: 0.25, dt: Some(1.0 / 128.0), tol: 1e-12, warn_only: true, ..Default::default() };
    let out = picard_solve(&s.a0, &s.u0, &s.d0, s.constants, &cfg).unwrap();
    let rows = energy_report(&out.trajectory).unwrap();
    // single mode |k|^2 = 2: E(t) = E(0) exp(-4 nu t)
    let e0 = rows[0].energy;
    for r in &rows {
        let exact = e0 * (-4.0 * s.constants.nu * r.time).exp();
        assert!((r.energy - exact).abs() <= 1e-10 * e0, "t = {}: {} vs {exact}", r.time, r.energy);
    }
}

#[test]
fn dyadic_rescaling_preserves_each_weak_residual() {
    let traj = small_run(64).0.trajectory;
    let scaled = rescale_trajectory(&traj, 1).unwrap();
    let res = |t: &lcflow::solver::Trajectory| {
        weak_form_residual(t, &default_test_functions(t.grid(), *t.times().last().unwrap())).unwrap()
    };
    for (a, b) in res(&traj).iter().zip(&res(&scaled)) {
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-9 * x.abs() + 1e-14, "{x} vs {y}");
        }
    }
}
