#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lcflow::besov::{besov_norm, block_norms, heat_characterization_norm, BesovIndex, TimeGrid};
use lcflow::diagnostics::{energy_report, verify_trajectory, Verdict, VerifyOptions};
use lcflow::duhamel::{Lemma, TimeSeriesField};
use lcflow::lagrangian::{
    delta_a_identity, delta_sources, flow_map, lagrangian_residuals, to_lagrangian, velocity_gradient_discrepancy,
    InverseSource,
};
use lcflow::scenarios::{by_name, taylor_green};
use lcflow::solver::{
    default_test_functions, picard_solve, weak_form_residual, x_norm_ledger, y_norm_ledger, SchemeConfig, Trajectory,
};
use lcflow::spectral::snapshot;
use lcflow::Grid;

mod config;
mod store;
mod suites;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "lcflow", version, about = "Pseudospectral liquid-crystal flow solver and verification suites")]
struct Cli {
    /// Output directory (for `simulate`, overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Picard scheme for a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run verification suites.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Besov norm tools.
    Besov {
        #[command(subcommand)]
        command: BesovCommand,
    },
    /// Lagrangian checks on a stored trajectory.
    Lagrangian {
        /// Trajectory directory written by `simulate`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        check: LagrangianCheck,
        /// Second trajectory for the difference identities.
        #[arg(long)]
        other: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Suite {
    /// Duhamel operator bounds over a random family.
    Duhamel {
        /// Lemma label such as `2.2` or `A.3`, or `all`.
        #[arg(long, default_value = "all")]
        lemma: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long, default_value_t = 32)]
        k: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Heat-semigroup characterization against the dyadic Besov norm.
    Besov {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 64)]
        m: usize,
    },
    /// Flow-map identities; uses a built-in Taylor-Green run without `--in`.
    Lagrangian {
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Every suite, with the trajectory checks run on `--in`.
    All {
        /// Trajectory directory written by `simulate`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
}

#[derive(Subcommand)]
enum BesovCommand {
    /// Norms of one snapshot field.
    Report {
        snapshot: PathBuf,
        /// `s,p,r`; `inf` is accepted for `p` and `r`.
        #[arg(long, allow_hyphen_values = true)]
        index: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LagrangianCheck {
    Identities,
    Residuals,
    #[value(name = "deltaA")]
    DeltaA,
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn e(v: f64) -> String {
    format!("{v:.9e}")
}

fn out_dir(cli_out: &Option<PathBuf>, fallback: &Path) -> Result<PathBuf> {
    let dir = cli_out.clone().unwrap_or_else(|| fallback.to_path_buf());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn simulate(cli_out: &Option<PathBuf>, config: &Path) -> Result<bool> {
    let cfg = RunConfig::load(config)?;
    let out = out_dir(cli_out, &cfg.output.directory)?;
    std::fs::write(out.join("config.resolved.toml"), cfg.to_toml()?)?;
    let grid = cfg.grid()?;
    let constants = cfg.constants()?;
    let scheme = cfg.scheme();
    let (a0, u0, d0) = match (&cfg.data.a0, &cfg.data.u0, &cfg.data.d0) {
        (Some(a), Some(u), Some(d)) => {
            let mut fields = Vec::new();
            for (key, p) in [("data.a0", a), ("data.u0", u), ("data.d0", d)] {
                let (f, _) = snapshot::read(p).with_context(|| format!("{key}: reading {}", p.display()))?;
                if *f.grid() != grid {
                    bail!("{key}: snapshot grid does not match [grid]");
                }
                fields.push(f);
            }
            let mut it = fields.into_iter();
            (it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
        }
        _ => {
            let name = cfg.data.scenario.as_deref().unwrap_or_default();
            let s = by_name(name, grid, &scheme, cfg.data.eta, cfg.data.seed, cfg.data.m).context("data.scenario")?;
            (s.a0, s.u0, s.d0)
        }
    };
    let outcome = picard_solve(&a0, &u0, &d0, constants, &scheme)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let traj = &outcome.trajectory;
    store::save(&out, traj, cfg.output.stride)?;

    let names: Vec<String> = outcome.reports.first().map(|r| r.components.iter().map(|c| c.0.clone()).collect()).unwrap_or_default();
    let mut header = vec!["n", "delta_u", "a_max", "converged"];
    header.extend(names.iter().map(String::as_str));
    write_csv(
        &out.join("iterations.csv"),
        &header,
        outcome.reports.iter().map(|r| {
            let mut row = vec![r.n.to_string(), e(r.delta_u), e(r.a_max), r.converged.to_string()];
            row.extend(r.components.iter().map(|c| e(c.1)));
            row
        }),
    )?;

    let ledger = if scheme.r > 1.0 && scheme.r < 2.0 {
        x_norm_ledger(traj, scheme.r)?
    } else {
        y_norm_ledger(traj, &scheme.weighted_table(grid.dim())?)?
    };
    let mut rows: Vec<Vec<String>> = ledger.items.iter().map(|(k, v)| vec![k.clone(), e(*v)]).collect();
    rows.push(vec!["total".into(), e(ledger.total)]);
    write_csv(&out.join("ledger.csv"), &["item", "value"], rows)?;

    let diag = energy_report(traj)?;
    write_diagnostics(&out.join("diagnostics.csv"), &diag)?;

    let tests = default_test_functions(&grid, scheme.t_end);
    let weak = weak_form_residual(traj, &tests)?;
    write_csv(
        &out.join("weak.csv"),
        &["k1", "k2", "k3", "phase", "component", "transport", "divergence", "momentum", "director"],
        tests.iter().zip(&weak).map(|(t, w)| {
            let mut row: Vec<String> = t.wavevector.iter().map(|k| k.to_string()).collect();
            row.push(e(t.phase));
            row.push(t.component.to_string());
            row.extend(w.values().iter().map(|v| e(*v)));
            row
        }),
    )?;
    let weak_max = weak.iter().map(|w| w.max_abs()).fold(0.0, f64::max);
    println!(
        "iterations {}, converged {}, eta {:.4e}, delta_u {:.3e}, ledger total {:.4e}, weak residual {:.3e}",
        outcome.reports.len(),
        outcome.converged(),
        outcome.eta,
        outcome.reports.last().map_or(f64::NAN, |r| r.delta_u),
        ledger.total,
        weak_max
    );
    println!("outputs in {}", out.display());
    if !outcome.converged() {
        eprintln!("Picard iteration did not reach scheme.tol = {} within scheme.n_max = {}", scheme.tol, scheme.n_max);
    }
    Ok(outcome.converged())
}

fn write_diagnostics(path: &Path, rows: &[lcflow::diagnostics::DiagnosticsRow]) -> Result<()> {
    write_csv(
        path,
        &["time", "energy", "dissipation", "de_dt", "energy_residual", "div_norm", "sphere_drift", "a_max"],
        rows.iter().map(|r| {
            [r.time, r.energy, r.dissipation, r.de_dt, r.residual, r.div_norm, r.sphere_drift, r.a_max].iter().map(|v| e(*v)).collect()
        }),
    )
}

fn finish(out: &Path, verdict: &Verdict) -> Result<bool> {
    let text = verdict.render();
    std::fs::write(out.join("verdict.txt"), &text)?;
    print!("{text}");
    Ok(verdict.passed())
}

fn builtin_taylor_green() -> Result<Trajectory> {
    let s = taylor_green(Grid::periodic(2, 64)?, 1.0);
    let cfg = SchemeConfig { t_end: 0.5, tol: 1e-10, warn_only: true, ..Default::default() };
    Ok(picard_solve(&s.a0, &s.u0, &s.d0, s.constants, &cfg)?.trajectory)
}

fn verify(out: &Path, suite: Suite) -> Result<bool> {
    let mut verdict = Verdict::default();
    match suite {
        Suite::Duhamel { lemma, trials, m, k, seed } => {
            let lemmas: Vec<Lemma> = if lemma == "all" { Lemma::ALL.to_vec() } else { vec![lemma.parse()?] };
            let (results, rows) = suites::duhamel(&lemmas, &suites::DuhamelOptions { trials, m, k, seed, dim: 2 })?;
            write_csv(&out.join("duhamel.csv"), &["lemma", "pair", "M", "K", "max_ratio"], rows)?;
            results.into_iter().for_each(|r| verdict.push(r));
        }
        Suite::Besov { trials, m } => {
            let (r, rows) = suites::besov(trials, m)?;
            write_csv(&out.join("besov.csv"), &["M", "s", "p", "r", "min_ratio", "max_ratio"], rows)?;
            verdict.push(r);
        }
        Suite::Lagrangian { input } => {
            let traj = match input {
                Some(dir) => store::load(&dir)?,
                None => builtin_taylor_green()?,
            };
            let (r, rows) = suites::lagrangian(&traj)?;
            write_csv(&out.join("lagrangian.csv"), &["quantity", "value"], rows)?;
            verdict.push(r);
        }
        Suite::All { input, trials } => {
            let traj = store::load(&input)?;
            write_diagnostics(&out.join("diagnostics.csv"), &energy_report(&traj)?)?;
            let mut opts = VerifyOptions::default();
            // the smallness index follows the run when its resolved config is alongside
            let resolved = input.join("config.resolved.toml");
            if resolved.exists() {
                let scheme = RunConfig::load(&resolved)?.scheme();
                opts.p = scheme.p_for(traj.grid().dim());
                opts.r = scheme.r;
            }
            verdict.suites.extend(verify_trajectory(&traj, &opts).suites);
            match suites::lagrangian(&traj) {
                Ok((r, rows)) => {
                    write_csv(&out.join("lagrangian.csv"), &["quantity", "value"], rows)?;
                    verdict.push(r);
                }
                Err(err) => verdict.push(lcflow::diagnostics::SuiteResult::new(format!("lagrangian ({err})"), false, vec![])),
            }
            let (results, rows) = suites::duhamel(&Lemma::ALL, &suites::DuhamelOptions { trials, ..Default::default() })?;
            write_csv(&out.join("duhamel.csv"), &["lemma", "pair", "M", "K", "max_ratio"], rows)?;
            verdict.suites.extend(results);
            let (r, rows) = suites::besov(20, 64)?;
            write_csv(&out.join("besov.csv"), &["M", "s", "p", "r", "min_ratio", "max_ratio"], rows)?;
            verdict.push(r);
        }
    }
    finish(out, &verdict)
}

fn parse_exponent(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    t.parse().with_context(|| format!("--index: cannot parse {t:?}"))
}

fn besov_report(out: &Path, path: &Path, index: &str) -> Result<bool> {
    let parts: Vec<&str> = index.split(',').collect();
    if parts.len() != 3 {
        bail!("--index: expected s,p,r, got {index:?}");
    }
    let idx = BesovIndex::new(parse_exponent(parts[0])?, parse_exponent(parts[1])?, parse_exponent(parts[2])?)?;
    let (field, time) = snapshot::read(path).with_context(|| format!("reading {}", path.display()))?;
    let field = field.mean_free();
    let norm = besov_norm(&field, idx)?;
    println!("{} (t = {time}): ||f||_B^{{{}}}_{{{},{}}} = {norm:.9e}", path.display(), idx.s, idx.p, idx.r);
    if idx.s < 0.0 {
        let h = heat_characterization_norm(&field, idx, &TimeGrid::for_grid(field.grid()))?;
        println!("heat characterization {h:.9e} (ratio {:.4})", h / norm);
    }
    write_csv(&out.join("besov_blocks.csv"), &["q", "block_lp_norm"], block_norms(&field, idx.p)?.into_iter().map(|(q, n)| vec![q.to_string(), e(n)]))?;
    Ok(true)
}

fn lagrangian_check(out: &Path, input: &Path, check: LagrangianCheck, other: Option<&Path>) -> Result<bool> {
    let traj = store::load(input)?;
    let fm = flow_map(&traj.u_series(), 16)?;
    let lag = to_lagrangian(&traj, &fm)?;
    match check {
        LagrangianCheck::Identities => {
            let rows = fm.times.iter().enumerate().map(|(k, t)| {
                let (src, terms, tail) = match fm.a_source[k] {
                    InverseSource::Neumann { terms, tail_bound, .. } => ("neumann", terms.to_string(), e(tail_bound)),
                    InverseSource::Direct => ("direct", String::new(), String::new()),
                };
                vec![e(*t), e(fm.lipschitz_budget[k]), src.to_string(), terms, tail]
            });
            write_csv(&out.join("flow_levels.csv"), &["time", "lipschitz_budget", "a_source", "neumann_terms", "tail_bound"], rows)?;
            let summary = [
                ("inverse_defect", fm.inverse_defect()),
                ("volume_defect", fm.volume_defect()),
                ("composition_defect", fm.composition_defect()),
                ("grad_u_discrepancy", velocity_gradient_discrepancy(&traj, &fm, &lag)),
                ("h_discrepancy", lag.h_discrepancy()),
                ("transport_defect", lag.transport_defect()),
            ];
            for (k, v) in summary {
                println!("{k} {v:.3e}");
            }
            write_csv(&out.join("identities.csv"), &["quantity", "value"], summary.iter().map(|(k, v)| vec![k.to_string(), e(*v)]))?;
        }
        LagrangianCheck::Residuals => {
            let r = lagrangian_residuals(&lag)?;
            let rows = [
                ("transport", r.transport),
                ("momentum", r.momentum),
                ("director", r.director),
                ("divergence", r.divergence),
                ("h_equation", r.h_equation),
            ];
            for (k, v) in rows {
                println!("{k} {v:.3e}");
            }
            write_csv(&out.join("residuals.csv"), &["equation", "max_l2_residual"], rows.iter().map(|(k, v)| vec![k.to_string(), e(*v)]))?;
        }
        LagrangianCheck::DeltaA => {
            let v1 = TimeSeriesField::new(lag.times.clone(), lag.v.clone())?;
            let (v2, lag2) = match other {
                Some(dir) => {
                    let t2 = store::load(dir)?;
                    let fm2 = flow_map(&t2.u_series(), 16)?;
                    let l2 = to_lagrangian(&t2, &fm2)?;
                    (TimeSeriesField::new(l2.times.clone(), l2.v.clone())?, Some(l2))
                }
                None => (v1.map(|f| f.scale(0.5))?, None),
            };
            let rep = delta_a_identity(&v1, &v2)?;
            println!("delta A discrepancy {:.3e} (|delta A| {:.3e}, order {})", rep.max_discrepancy, rep.max_delta_a, rep.max_terms);
            write_csv(
                &out.join("delta_a.csv"),
                &["max_discrepancy", "max_delta_a", "terms"],
                [vec![e(rep.max_discrepancy), e(rep.max_delta_a), rep.max_terms.to_string()]],
            )?;
            if let Some(l2) = lag2 {
                let mut rows = Vec::new();
                for k in 1..lag.times.len().saturating_sub(1) {
                    let s = delta_sources(&lag, &l2, k)?;
                    let mut row = vec![e(lag.times[k])];
                    row.extend(s.f.iter().chain([&s.g, &s.r]).map(|f| e(f.l2_norm())));
                    rows.push(row);
                }
                write_csv(&out.join("delta_sources.csv"), &["time", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "g", "R"], rows)?;
            }
        }
    }
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config } => simulate(&cli.out, &config),
        Command::Verify { suite } => verify(&out_dir(&cli.out, Path::new("out"))?, suite),
        Command::Besov { command: BesovCommand::Report { snapshot, index } } => {
            besov_report(&out_dir(&cli.out, Path::new("out"))?, &snapshot, &index)
        }
        Command::Lagrangian { input, check, other } => {
            lagrangian_check(&out_dir(&cli.out, Path::new("out"))?, &input, check, other.as_deref())
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("EL_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("EL_THREADS: expected a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("EL_THREADS: must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
