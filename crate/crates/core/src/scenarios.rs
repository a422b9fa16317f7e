//! Named initial data used by tests, benches and the CLI.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::besov::{besov_norm, BesovIndex};
use crate::error::{Error, Result};
use crate::solver::SchemeConfig;
use crate::spectral::{gradient, leray_project, Grid, PhysicalConstants, SpectralField};

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub constants: PhysicalConstants,
    pub a0: SpectralField,
    pub u0: SpectralField,
    pub d0: SpectralField,
}

fn unit_director(grid: Grid) -> SpectralField {
    let dim = grid.dim();
    SpectralField::from_fn(grid, dim, |_, o| {
        o.fill(0.0);
        o[dim - 1] = 1.0;
    })
}

/// Zero velocity and density perturbation, constant director `e_N`.
pub fn zero(grid: Grid) -> Scenario {
    let dim = grid.dim();
    Scenario {
        name: "zero".into(),
        constants: PhysicalConstants::default(),
        a0: SpectralField::zeros(grid, 1),
        u0: SpectralField::zeros(grid, dim),
        d0: unit_director(grid),
    }
}

/// `d0 = (cos(2 pi m x1 / L), sin(2 pi m x1 / L), 0)`, which satisfies
/// `Lap d0 + |grad d0|^2 d0 = 0`; no flow.
pub fn stationary_director(grid: Grid, m: u32) -> Scenario {
    let dim = grid.dim();
    let k = 2.0 * PI * m as f64 / grid.box_length();
    Scenario {
        name: format!("stationary_director(m={m})"),
        constants: PhysicalConstants::default(),
        a0: SpectralField::zeros(grid, 1),
        u0: SpectralField::zeros(grid, dim),
        d0: SpectralField::from_fn(grid, dim, |x, o| {
            o.fill(0.0);
            o[0] = (k * x[0]).cos();
            o[1] = (k * x[0]).sin();
        }),
    }
}

/// `u0 = amp (cos k x1 sin k x2, -sin k x1 cos k x2, 0)` with `k = 2 pi / L`,
/// constant director, `a0 = 0`.
pub fn taylor_green(grid: Grid, amp: f64) -> Scenario {
    let dim = grid.dim();
    let k = 2.0 * PI / grid.box_length();
    Scenario {
        name: "taylor_green".into(),
        constants: PhysicalConstants::default(),
        a0: SpectralField::zeros(grid, 1),
        u0: SpectralField::from_fn(grid, dim, |x, o| {
            o.fill(0.0);
            o[0] = amp * (k * x[0]).cos() * (k * x[1]).sin();
            o[1] = -amp * (k * x[0]).sin() * (k * x[1]).cos();
        }),
        d0: unit_director(grid),
    }
}

/// Two-level density perturbation with smooth `tanh` interfaces at
/// `x1 = L/4` and `3L/4`, a weak Taylor-Green flow and a constant director.
pub fn mixture_step_density(grid: Grid) -> Scenario {
    let length = grid.box_length();
    let width = 2.0 * grid.spacing();
    let tg = taylor_green(grid, 0.001);
    Scenario {
        name: "mixture_step_density".into(),
        a0: SpectralField::from_fn(grid, 1, |x, o| {
            let s = ((x[0] - 0.25 * length) / width).tanh() - ((x[0] - 0.75 * length) / width).tanh();
            o[0] = 0.01 * (s - 1.0);
        }),
        ..tg
    }
}

/// Random smooth field with modes `0 < |k|_inf <= 3`, amplitudes `~1/|k|`.
fn random_modes(grid: Grid, components: usize, rng: &mut ChaCha8Rng) -> SpectralField {
    let dim = grid.dim();
    let base = 2.0 * PI / grid.box_length();
    let mut terms = Vec::new();
    let range = -3i64..=3;
    let mut ks = Vec::new();
    for k0 in range.clone() {
        for k1 in range.clone() {
            for k2 in if dim == 3 { range.clone() } else { 0..=0 } {
                let k = [k0, k1, k2];
                if k.iter().any(|v| *v != 0) {
                    ks.push(k);
                }
            }
        }
    }
    for k in ks {
        let norm = (k.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
        let amps: Vec<f64> = (0..components).map(|_| rng.gen_range(-1.0..1.0) / norm).collect();
        let phase = rng.gen_range(0.0..2.0 * PI);
        terms.push((k, amps, phase));
    }
    SpectralField::from_fn(grid, components, |x, o| {
        o.fill(0.0);
        for (k, amps, phase) in &terms {
            let arg: f64 = (0..dim).map(|j| base * k[j] as f64 * x[j]).sum::<f64>() + phase;
            let c = arg.cos();
            for (oc, a) in o.iter_mut().zip(amps) {
                *oc += a * c;
            }
        }
    })
}

/// Random data with smallness `eta ~ eta_target`, split evenly between
/// `||a0||_inf`, the velocity norm and the director-gradient norm at the
/// critical index of `config`.
pub fn random_small(grid: Grid, eta_target: f64, seed: u64, config: &SchemeConfig) -> Result<Scenario> {
    if !(eta_target > 0.0) {
        return Err(Error::InvalidIndex(format!("eta target must be positive, got {eta_target}")));
    }
    let dim = grid.dim();
    let p = config.p_for(dim);
    let idx = BesovIndex::new(dim as f64 / p - 1.0, p, config.r)?;
    let share = eta_target / 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let a = random_modes(grid, 1, &mut rng);
    let a0 = a.scale(share / a.linf_norm());

    let v = leray_project(&random_modes(grid, dim, &mut rng))?;
    let u0 = v.scale(share / besov_norm(&v, idx)?);

    let psi = random_modes(grid, dim, &mut rng);
    let director = |eps: f64| {
        psi.map_points(dim, |v, o| {
            for (j, oj) in o.iter_mut().enumerate() {
                *oj = eps * v[j] + if j == dim - 1 { 1.0 } else { 0.0 };
            }
            let n = o.iter().map(|x| x * x).sum::<f64>().sqrt();
            o.iter_mut().for_each(|x| *x /= n);
        })
    };
    let size = |eps: f64| -> Result<f64> { besov_norm(&gradient(&director(eps)), idx) };
    let (mut lo, mut hi) = (0.0, 1e-3);
    while size(hi)? < share {
        hi *= 2.0;
        if hi > 1.0 {
            return Err(Error::InvalidIndex(format!("eta target {eta_target} is too large for the director perturbation")));
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if size(mid)? < share {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Scenario {
        name: format!("random_small(eta={eta_target}, seed={seed})"),
        constants: PhysicalConstants::default(),
        a0,
        u0,
        d0: director(0.5 * (lo + hi)),
    })
}

/// Looks a scenario up by its configuration name.
/// Mean-zero scalar field made of `count` random Fourier modes with
/// `|k_i| <= kmax` (in units of `2 pi / L`). The draw depends only on
/// `seed`, so the same function can be sampled on any grid.
pub fn band_limited(grid: Grid, seed: u64, kmax: i64, count: usize) -> SpectralField {
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<([f64; 3], f64, f64)> = (0..count)
        .map(|_| {
            let mut k = [0.0; 3];
            while k.iter().all(|v| *v == 0.0) {
                for kj in k.iter_mut().take(dim) {
                    *kj = rng.gen_range(-kmax..=kmax) as f64;
                }
            }
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let base = grid.base_frequency();
    SpectralField::from_fn(grid, 1, |x, o| {
        o[0] = modes
            .iter()
            .map(|(k, amp, ph)| amp * ((0..dim).map(|j| k[j] * x[j]).sum::<f64>() * base + ph).cos())
            .sum();
    })
}

pub fn by_name(name: &str, grid: Grid, config: &SchemeConfig, eta: f64, seed: u64, m: u32) -> Result<Scenario> {
    match name {
        "zero" => Ok(zero(grid)),
        "stationary_director" => Ok(stationary_director(grid, m)),
        "taylor_green" => Ok(taylor_green(grid, 1.0)),
        "mixture_step_density" => Ok(mixture_step_density(grid)),
        "random_small" => random_small(grid, eta, seed, config),
        other => Err(Error::InvalidIndex(format!("unknown scenario {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{smallness_eta, sphere_drift};
    use crate::spectral::{divergence_norm, laplacian, scalar_times, squared_norm};

    #[test]
    fn stationary_director_is_harmonic_map() {
        let g = Grid::periodic(2, 32).unwrap();
        let s = stationary_director(g, 2);
        let d = &s.d0;
        let res = laplacian(d).add(&scalar_times(&squared_norm(&gradient(d)), d));
        assert!(res.linf_norm() < 1e-10);
        assert!(sphere_drift(d) < 1e-15);
    }

    #[test]
    fn random_small_hits_target() {
        let g = Grid::periodic(2, 32).unwrap();
        let cfg = SchemeConfig::default();
        let s = random_small(g, 0.01, 7, &cfg).unwrap();
        let eta = smallness_eta(&s.a0, &s.u0, &s.d0, cfg.p_for(2), cfg.r).unwrap();
        assert!((eta - 0.01).abs() < 1e-6, "{eta}");
        assert!(divergence_norm(&s.u0).unwrap() < 1e-12);
        let again = random_small(g, 0.01, 7, &cfg).unwrap();
        assert_eq!(again.u0.values(), s.u0.values());
    }

    #[test]
    fn mixture_density_stays_positive() {
        let g = Grid::periodic(2, 32).unwrap();
        let s = mixture_step_density(g);
        assert!(s.a0.values().iter().all(|v| *v > -1.0));
        assert!(s.a0.linf_norm() > 0.0099);
    }
}
