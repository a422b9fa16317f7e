//! Duhamel operators `A = int Lap e^{(t-s)Lap}`, `B = int grad e^{(t-s)Lap}`
//! and `C = int e^{(t-s)Lap}`, weighted space-time norms, and empirical
//! operator-norm reports for the boundedness lemmas.
//!
//! Time integration is exact per Fourier mode for data that is piecewise
//! linear in time.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fields sampled at increasing times `t_0 < ... < t_K` on one grid.
#[derive(Clone, Debug)]
pub struct TimeSeriesField {
    times: Vec<f64>,
    fields: Vec<SpectralField>,
    uniform: bool,
}

impl TimeSeriesField {
    pub fn new(times: Vec<f64>, fields: Vec<SpectralField>) -> Result<Self> {
        if times.is_empty() || fields.is_empty() {
            return Err(Error::EmptySeries);
        }
        if times.len() != fields.len() {
            return Err(Error::TimeGridMismatch(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::TimeGridMismatch("times must be finite, nonnegative and increasing".into()));
        }
        let g = *fields[0].grid();
        let c = fields[0].components();
        if fields.iter().any(|f| *f.grid() != g) {
            return Err(Error::GridMismatch);
        }
        if let Some(f) = fields.iter().find(|f| f.components() != c) {
            return Err(Error::ComponentMismatch { expected: c, found: f.components() });
        }
        let uniform = match times.len() {
            0..=2 => true,
            _ => {
                let h = times[1] - times[0];
                times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * times[times.len() - 1].max(1.0))
            }
        };
        Ok(Self { times, fields, uniform })
    }

    /// Uniform grid `t_k = k T / K`, `k = 0..=K`, sampled from `f(t)`.
    pub fn sample(t_end: f64, steps: usize, f: impl Fn(f64) -> SpectralField) -> Result<Self> {
        let times: Vec<f64> = (0..=steps).map(|k| t_end * k as f64 / steps as f64).collect();
        let fields = times.iter().map(|&t| f(t)).collect();
        Self::new(times, fields)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[SpectralField] {
        &self.fields
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn components(&self) -> usize {
        self.fields[0].components()
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField + Send + Sync) -> Result<Self> {
        let fields = self.fields.par_iter().map(f).collect();
        Self::new(self.times.clone(), fields)
    }

    /// `a * self + b * other` on the same time grid.
    pub fn combine(&self, a: f64, other: &TimeSeriesField, b: f64) -> Result<Self> {
        if self.times != other.times {
            return Err(Error::TimeGridMismatch("series times differ".into()));
        }
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(x, y)| x.scale(a).axpy(b, y))
            .collect();
        Self::new(self.times.clone(), fields)
    }
}

/// Per-mode weights of one exponential-integrator step of length `h` for
/// `y' = -kappa |xi|^2 y + g` with `g` linear on the step:
/// `y_1 = decay y_0 + w_old g_0 + w_new g_1`.
#[derive(Clone, Debug)]
pub struct ExpWeights {
    pub decay: Vec<f64>,
    pub w_old: Vec<f64>,
    pub w_new: Vec<f64>,
}

/// `(1 - e^{-z}) / z` and `(1 - e^{-z}(1 + z)) / z^2`, stable near 0.
fn phi_pair(z: f64) -> (f64, f64) {
    if z < 1e-2 {
        // (1 - e^{-z})/z = sum_{n>=1} (-1)^{n+1} z^{n-1}/n!
        // (1 - e^{-z}(1+z))/z^2 = sum_{n>=2} (-1)^n (n-1) z^{n-2}/n!
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        let mut fact = 1.0;
        for n in 1..14 {
            fact *= n as f64;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            p1 += sign * z.powi(n - 1) / fact;
            if n >= 2 {
                p2 -= sign * (n as f64 - 1.0) * z.powi(n - 2) / fact;
            }
        }
        (p1, p2)
    } else {
        let e = (-z).exp();
        (-(-z).exp_m1() / z, (1.0 - e * (1.0 + z)) / (z * z))
    }
}

impl ExpWeights {
    pub fn new(grid: &Grid, diffusivity: f64, h: f64) -> Self {
        let modes = grid.modes();
        let n = grid.npoints();
        let mut decay = Vec::with_capacity(n);
        let mut w_old = Vec::with_capacity(n);
        let mut w_new = Vec::with_capacity(n);
        for flat in 0..n {
            let z = diffusivity * modes.xi2[flat] * h;
            let (p1, p2) = phi_pair(z);
            decay.push((-z).exp());
            w_old.push(h * p2);
            w_new.push(h * (p1 - p2));
        }
        Self { decay, w_old, w_new }
    }

    /// One step on component-major coefficient arrays.
    pub fn step(&self, y0: &[Complex64], g0: &[Complex64], g1: &[Complex64]) -> Vec<Complex64> {
        let n = self.decay.len();
        y0.iter()
            .zip(g0)
            .zip(g1)
            .enumerate()
            .map(|(i, ((y, a), b))| {
                let m = i % n;
                y * self.decay[m] + a * self.w_old[m] + b * self.w_new[m]
            })
            .collect()
    }
}

/// Coefficients of `int_{t_0}^{t} e^{kappa (t-s) Lap} f(s) ds` at every time.
pub fn convolve_coefficients(f: &TimeSeriesField, diffusivity: f64) -> Vec<Vec<Complex64>> {
    let grid = *f.grid();
    let len = f.components() * grid.npoints();
    let mut out = Vec::with_capacity(f.len());
    let mut acc = vec![ZERO; len];
    out.push(acc.clone());
    let mut cached: Option<(f64, ExpWeights)> = None;
    for k in 0..f.len() - 1 {
        let h = f.times[k + 1] - f.times[k];
        let w = match &cached {
            Some((hh, w)) if (hh - h).abs() <= 1e-14 * h => w,
            _ => {
                cached = Some((h, ExpWeights::new(&grid, diffusivity, h)));
                &cached.as_ref().expect("just set").1
            }
        };
        acc = w.step(&acc, f.fields[k].fourier(), f.fields[k + 1].fourier());
        out.push(acc.clone());
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DuhamelOp {
    A,
    B,
    C,
}

impl fmt::Display for DuhamelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DuhamelOp::A => "A",
            DuhamelOp::B => "B",
            DuhamelOp::C => "C",
        };
        f.write_str(s)
    }
}

pub fn apply(op: DuhamelOp, f: &TimeSeriesField) -> Result<TimeSeriesField> {
    match op {
        DuhamelOp::A => op_a(f),
        DuhamelOp::B => op_b(f),
        DuhamelOp::C => op_c(f),
    }
}

fn finish(f: &TimeSeriesField, coeffs: Vec<Vec<Complex64>>, c_out: usize, mult: impl Fn(usize, &[Complex64], &mut [Complex64]) + Sync) -> Result<TimeSeriesField> {
    let grid = *f.grid();
    let n = grid.npoints();
    let c_in = f.components();
    let fields = coeffs
        .into_par_iter()
        .map(|c| {
            let mut out = vec![ZERO; c_out * n];
            let mut a = vec![ZERO; c_in];
            let mut b = vec![ZERO; c_out];
            for flat in 0..n {
                for k in 0..c_in {
                    a[k] = c[k * n + flat];
                }
                mult(flat, &a, &mut b);
                for k in 0..c_out {
                    out[k * n + flat] = b[k];
                }
            }
            SpectralField::from_fourier(grid, c_out, out)
        })
        .collect();
    TimeSeriesField::new(f.times.clone(), fields)
}

/// `A f (t) = int_{t_0}^t Lap e^{(t-s) Lap} f(s) ds`.
pub fn op_a(f: &TimeSeriesField) -> Result<TimeSeriesField> {
    let modes = f.grid().modes();
    let coeffs = convolve_coefficients(f, 1.0);
    finish(f, coeffs, f.components(), |flat, a, b| {
        for (o, v) in b.iter_mut().zip(a) {
            *o = v * -modes.xi2[flat];
        }
    })
}

/// `B f (t) = int_{t_0}^t grad e^{(t-s) Lap} f(s) ds`; component
/// `c * N + j` holds the `x_j` derivative of component `c`.
pub fn op_b(f: &TimeSeriesField) -> Result<TimeSeriesField> {
    let modes = f.grid().modes();
    let dim = f.grid().dim();
    let coeffs = convolve_coefficients(f, 1.0);
    finish(f, coeffs, f.components() * dim, |flat, a, b| {
        for (c, v) in a.iter().enumerate() {
            for j in 0..dim {
                b[c * dim + j] = if modes.nyquist[flat] { ZERO } else { v * Complex64::new(0.0, modes.xi[flat][j]) };
            }
        }
    })
}

/// `C f (t) = int_{t_0}^t e^{(t-s) Lap} f(s) ds`.
pub fn op_c(f: &TimeSeriesField) -> Result<TimeSeriesField> {
    let coeffs = convolve_coefficients(f, 1.0);
    finish(f, coeffs, f.components(), |_, a, b| b.copy_from_slice(a))
}

/// `|| t^w f(t) ||_{L^r_t L^p_x}` by the trapezoid rule in time (`r = inf`
/// is the maximum over the grid).
///
/// With `t_0 = 0` and `w < 0` the first interval is replaced by
/// `int_0^{t_1} t^{w r} ||f(t_1)||^r dt`, which needs `w r > -1`.
pub fn weighted_norm(f: &TimeSeriesField, weight_exp: f64, p: f64, r: f64) -> Result<f64> {
    let norms: Vec<f64> = f.fields.par_iter().map(|g| g.lp_norm(p)).collect();
    weighted_time_norm(&f.times, &norms, weight_exp, r)
}

/// Weighted `L^r` norm in time of precomputed spatial norms.
pub fn weighted_time_norm(times: &[f64], norms: &[f64], weight_exp: f64, r: f64) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::EmptySeries);
    }
    let singular = times[0] == 0.0 && weight_exp < 0.0;
    let start = usize::from(singular);
    let weighted = |k: usize| -> f64 {
        if weight_exp == 0.0 {
            norms[k]
        } else {
            times[k].powf(weight_exp) * norms[k]
        }
    };
    if r.is_infinite() {
        return Ok((start..times.len()).map(weighted).fold(0.0, f64::max));
    }
    if singular && weight_exp * r <= -1.0 {
        return Err(Error::InvalidIndex(format!(
            "weight {weight_exp} is not r-integrable at t = 0 (w r = {})",
            weight_exp * r
        )));
    }
    if times.len() == 1 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for k in start..times.len() - 1 {
        let h = times[k + 1] - times[k];
        sum += 0.5 * h * (weighted(k).powf(r) + weighted(k + 1).powf(r));
    }
    if singular && times.len() > 1 {
        let t1 = times[1];
        let e = weight_exp * r + 1.0;
        sum += norms[1].powf(r) * t1.powf(e) / e;
    }
    Ok(sum.powf(1.0 / r))
}

/// Exponents of the weighted solution space, with the `eps` shift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedExponentTable {
    pub dim: usize,
    pub r: f64,
    pub epsilon: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

impl WeightedExponentTable {
    /// `p2` is fixed by `1/p1 = 1/p2 + 1/p3`; `p3 = inf` is allowed.
    pub fn new(dim: usize, r: f64, p1: f64, p3: f64, epsilon: f64) -> Result<Self> {
        let inv2 = 1.0 / p1 - 1.0 / p3;
        if !(inv2 > 0.0) {
            return Err(Error::InvalidIndex(format!("1/p1 - 1/p3 must be positive (p1 = {p1}, p3 = {p3})")));
        }
        if !(r > 1.0) || epsilon < 0.0 {
            return Err(Error::InvalidIndex(format!("need r > 1 and eps >= 0, got r = {r}, eps = {epsilon}")));
        }
        let n = dim as f64;
        let p2 = 1.0 / inv2;
        let half = |v: f64| 0.5 * (v - epsilon);
        Ok(Self {
            dim,
            r,
            epsilon,
            p1,
            p2,
            p3,
            alpha1: half(3.0 - n / p1) - 1.0 / (2.0 * r),
            alpha2: half(3.0 - n / p1) - 1.0 / r,
            beta1: half(2.0 - n / p2) - 1.0 / (2.0 * r),
            beta2: half(2.0 - n / p2),
            beta3: half(2.0 - 2.0 * n / p3) - 1.0 / (2.0 * r),
            beta4: half(2.0 - 2.0 * n / p3),
            gamma1: half(1.0 - n / p3) - 1.0 / (2.0 * r),
            gamma2: half(1.0 - n / p3),
            gamma3: half(1.0 - n / (3.0 * p1)) - 1.0 / (2.0 * r),
            gamma4: half(1.0 - n / (3.0 * p1)),
        })
    }

    /// `max{p, N r/(2r-1)} < p1 < N` and `N r/(r-1) < p3 <= inf`.
    pub fn check(&self, p: f64) -> Result<()> {
        let n = self.dim as f64;
        let r = self.r;
        let lo = p.max(n * r / (2.0 * r - 1.0));
        if !(self.p1 > lo && self.p1 < n) {
            return Err(Error::Hypothesis {
                lemma: "weighted space".into(),
                condition: format!("max{{p, Nr/(2r-1)}} = {lo} < p1 = {} < N = {n}", self.p1),
            });
        }
        if !(self.p3 > n * r / (r - 1.0)) {
            return Err(Error::Hypothesis {
                lemma: "weighted space".into(),
                condition: format!("Nr/(r-1) = {} < p3 = {}", n * r / (r - 1.0), self.p3),
            });
        }
        Ok(())
    }
}

/// The boundedness statements exercised by [`weighted_bound_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lemma {
    MaxRegularity,
    GradientBound,
    HeatBound,
    WeightedMaxRegularity,
    WeightedHeat,
    WeightedGradient,
    WeightedHeatEps,
    WeightedGradientEps,
    HeatSup,
    GradientSup,
}

impl Lemma {
    pub const ALL: [Lemma; 10] = [
        Lemma::MaxRegularity,
        Lemma::GradientBound,
        Lemma::HeatBound,
        Lemma::WeightedMaxRegularity,
        Lemma::WeightedHeat,
        Lemma::WeightedGradient,
        Lemma::WeightedHeatEps,
        Lemma::WeightedGradientEps,
        Lemma::HeatSup,
        Lemma::GradientSup,
    ];

    /// Short label used on the command line.
    pub fn label(&self) -> &'static str {
        match self {
            Lemma::MaxRegularity => "2.2",
            Lemma::GradientBound => "2.3",
            Lemma::HeatBound => "2.4",
            Lemma::WeightedMaxRegularity => "2.5",
            Lemma::WeightedHeat => "2.6",
            Lemma::WeightedGradient => "2.7",
            Lemma::WeightedHeatEps => "A.1",
            Lemma::WeightedGradientEps => "A.2",
            Lemma::HeatSup => "A.3",
            Lemma::GradientSup => "A.4",
        }
    }

    /// Default exponents on an `N`-dimensional grid.
    pub fn default_params(&self, dim: usize) -> LemmaParams {
        let n = dim as f64;
        let mut p = LemmaParams::default();
        match self {
            Lemma::MaxRegularity => {
                p.r1 = 2.0;
                p.q1 = 2.0;
            }
            Lemma::GradientBound => {
                // N/2 (1/q1 - 1/q2) = 1/4 gives 1/r2 = 1/r1 - 1/4
                p.q1 = 2.0;
                p.q2 = 2.0 * n / (n - 1.0);
                p.r1 = 2.0;
                p.r2 = 4.0;
            }
            Lemma::HeatBound => {
                // N/2 (1/q1 - 1/q2) = 1/2 gives 1/r2 = 1/r1 - 1/2
                p.q1 = 2.0;
                p.q2 = 2.0 * n / (n - 2.0).max(0.0);
                if dim == 2 {
                    p.q1 = 4.0 / 3.0;
                    p.q2 = 4.0;
                }
                p.r1 = 1.5;
                p.r2 = 6.0;
            }
            Lemma::WeightedMaxRegularity => {
                p.rbar = 2.0;
                p.q = 2.0;
                p.alpha = 0.25;
            }
            Lemma::WeightedHeat | Lemma::WeightedHeatEps => {
                p.rbar = 4.0;
                p.q = 0.75 * n;
                p.q_out = 2.0 * n;
                p.eps = if *self == Lemma::WeightedHeatEps { 0.1 } else { 0.0 };
            }
            Lemma::WeightedGradient | Lemma::WeightedGradientEps => {
                p.rbar = 4.0;
                p.q = 0.75 * n;
                p.q_out = 1.5 * n;
                p.eps = if *self == Lemma::WeightedGradientEps { 0.1 } else { 0.0 };
            }
            Lemma::HeatSup => {
                p.rbar = 4.0;
                p.q = n;
            }
            Lemma::GradientSup => {
                p.rbar = 4.0;
                p.q = 3.0 * n;
            }
        }
        p
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Lemma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Lemma::ALL
            .iter()
            .copied()
            .find(|l| l.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidIndex(format!("unknown lemma {s:?}")))
    }
}

/// Exponents for one lemma. Unused fields are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub r1: f64,
    pub q1: f64,
    pub r2: f64,
    pub q2: f64,
    pub rbar: f64,
    pub q: f64,
    /// Output integrability (`q~` for the heat bounds, `q-bar` for the gradient bounds).
    pub q_out: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl Default for LemmaParams {
    fn default() -> Self {
        Self { r1: 2.0, q1: 2.0, r2: 2.0, q2: 2.0, rbar: 2.0, q: 2.0, q_out: 2.0, alpha: 0.0, eps: 0.0 }
    }
}

/// One inequality `|| t^{w_out} Op f ||_{L^{r_out} L^{q_out}} <= C || t^{w_in} f ||_{L^{r_in} L^{q_in}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub label: String,
    pub op: DuhamelOp,
    pub in_weight: f64,
    pub in_space: f64,
    pub in_time: f64,
    pub out_weight: f64,
    pub out_space: f64,
    pub out_time: f64,
}

fn violated(lemma: Lemma, condition: String) -> Error {
    Error::Hypothesis { lemma: lemma.label().into(), condition }
}

fn require(lemma: Lemma, ok: bool, condition: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(violated(lemma, condition()))
    }
}

/// Checks the lemma's hypotheses and returns the inequalities it asserts.
pub fn lemma_pairs(lemma: Lemma, p: &LemmaParams, dim: usize) -> Result<Vec<BoundPair>> {
    let n = dim as f64;
    let open = |v: f64| v > 1.0 && v < f64::INFINITY;
    let pair = |label: &str, op, in_weight, in_space, in_time, out_weight, out_space, out_time| BoundPair {
        label: label.to_string(),
        op,
        in_weight,
        in_space,
        in_time,
        out_weight,
        out_space,
        out_time,
    };
    match lemma {
        Lemma::MaxRegularity => {
            require(lemma, open(p.r1) && open(p.q1), || format!("1 < p = {}, q = {} < inf", p.r1, p.q1))?;
            Ok(vec![pair("A", DuhamelOp::A, 0.0, p.q1, p.r1, 0.0, p.q1, p.r1)])
        }
        Lemma::GradientBound | Lemma::HeatBound => {
            require(lemma, open(p.r1) && open(p.r2), || format!("1 < r1 = {}, r2 = {} < inf", p.r1, p.r2))?;
            require(lemma, p.q1 >= 1.0 && p.q2 >= p.q1, || format!("1 <= q1 = {} <= q2 = {}", p.q1, p.q2))?;
            let gap = n / 2.0 * (1.0 / p.q1 - 1.0 / p.q2);
            let (op, shift) = if lemma == Lemma::GradientBound {
                require(lemma, gap + 0.5 < 1.0, || format!("(N/2)(1/q1 - 1/q2) + 1/2 = {} < 1", gap + 0.5))?;
                (DuhamelOp::B, 0.5)
            } else {
                require(lemma, gap < 1.0, || format!("(N/2)(1/q1 - 1/q2) = {gap} < 1"))?;
                (DuhamelOp::C, 1.0)
            };
            let lhs = 1.0 / p.r1 + gap;
            let rhs = shift + 1.0 / p.r2;
            require(lemma, (lhs - rhs).abs() < 1e-12, || {
                format!("1/r1 + (N/2)(1/q1 - 1/q2) = {lhs} must equal {shift} + 1/r2 = {rhs}")
            })?;
            Ok(vec![pair(&op.to_string(), op, 0.0, p.q1, p.r1, 0.0, p.q2, p.r2)])
        }
        Lemma::WeightedMaxRegularity => {
            require(lemma, open(p.rbar) && open(p.q), || format!("1 < rbar = {}, q = {} < inf", p.rbar, p.q))?;
            require(lemma, p.alpha > 0.0 && p.alpha < 1.0 - 1.0 / p.rbar, || {
                format!("alpha = {} in (0, 1 - 1/rbar = {})", p.alpha, 1.0 - 1.0 / p.rbar)
            })?;
            Ok(vec![pair("t^a A", DuhamelOp::A, p.alpha, p.q, p.rbar, p.alpha, p.q, p.rbar)])
        }
        Lemma::WeightedHeat | Lemma::WeightedHeatEps | Lemma::WeightedGradient | Lemma::WeightedGradientEps => {
            let eps = if matches!(lemma, Lemma::WeightedHeat | Lemma::WeightedGradient) { 0.0 } else { p.eps };
            require(lemma, open(p.rbar), || format!("1 < rbar = {} < inf", p.rbar))?;
            require(lemma, (0.0..1.0).contains(&eps), || format!("0 <= eps = {eps} < 1"))?;
            let q_hi = n / (1.0 - eps);
            require(lemma, p.q > n / 2.0 && p.q < q_hi, || format!("N/2 = {} < q = {} < N/(1-eps) = {q_hi}", n / 2.0, p.q))?;
            let alpha = 0.5 * (3.0 - n / p.q - eps) - 1.0 / p.rbar;
            let sup_ok = p.rbar > 2.0 && n * p.rbar / (2.0 * p.rbar - 2.0) < p.q;
            if matches!(lemma, Lemma::WeightedHeat | Lemma::WeightedHeatEps) {
                require(lemma, p.q_out > n.max(p.q), || format!("max{{N, q}} = {} < q~ = {}", n.max(p.q), p.q_out))?;
                let gamma_bar = 0.5 * (1.0 - n / p.q_out - eps);
                let gamma = gamma_bar - 1.0 / p.rbar;
                let mut v = vec![pair("t^g C", DuhamelOp::C, alpha, p.q, p.rbar, gamma, p.q_out, p.rbar)];
                if sup_ok {
                    v.push(pair("t^gbar C sup", DuhamelOp::C, alpha, p.q, p.rbar, gamma_bar, p.q_out, f64::INFINITY));
                }
                Ok(v)
            } else {
                require(lemma, p.q <= p.q_out, || format!("q = {} <= qbar = {}", p.q, p.q_out))?;
                require(lemma, 1.0 / p.q - 1.0 / p.q_out < 1.0 / n, || {
                    format!("1/q - 1/qbar = {} < 1/N", 1.0 / p.q - 1.0 / p.q_out)
                })?;
                let beta_bar = 0.5 * (2.0 - n / p.q_out - eps);
                let beta = beta_bar - 1.0 / p.rbar;
                let mut v = vec![pair("t^b B", DuhamelOp::B, alpha, p.q, p.rbar, beta, p.q_out, p.rbar)];
                if sup_ok && p.q_out < n * p.rbar {
                    v.push(pair("t^bbar B sup", DuhamelOp::B, alpha, p.q, p.rbar, beta_bar, p.q_out, f64::INFINITY));
                }
                Ok(v)
            }
        }
        Lemma::HeatSup => {
            require(lemma, p.rbar > 1.0 && p.rbar.is_finite(), || format!("1 < rbar = {}", p.rbar))?;
            let lo = n * p.rbar / (2.0 * p.rbar - 2.0);
            require(lemma, p.q > lo, || format!("q = {} > N rbar/(2 rbar - 2) = {lo}", p.q))?;
            let sigma = 1.0 - n / (2.0 * p.q) - 1.0 / p.rbar;
            Ok(vec![pair("C sup", DuhamelOp::C, sigma, p.q, p.rbar, 0.0, f64::INFINITY, f64::INFINITY)])
        }
        Lemma::GradientSup => {
            require(lemma, p.rbar > 2.0 && p.rbar.is_finite(), || format!("2 < rbar = {}", p.rbar))?;
            let lo = n * p.rbar / (p.rbar - 2.0);
            require(lemma, p.q > lo, || format!("q = {} > N rbar/(rbar - 2) = {lo}", p.q))?;
            let sigma = 0.5 * (1.0 - n / p.q) - 1.0 / p.rbar;
            Ok(vec![
                pair("B sup", DuhamelOp::B, sigma, p.q, p.rbar, 0.0, f64::INFINITY, f64::INFINITY),
                pair("t^-1/2 C sup", DuhamelOp::C, sigma, p.q, p.rbar, -0.5, f64::INFINITY, f64::INFINITY),
            ])
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: BoundPair,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub lemma: Lemma,
    pub params: LemmaParams,
    pub pairs: Vec<PairReport>,
}

impl BoundReport {
    pub fn max_ratio(&self) -> f64 {
        self.pairs.iter().map(|p| p.max_ratio).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.pairs.iter().all(|p| p.ratios.iter().all(|r| r.is_finite()))
    }
}

/// Ratio of weighted output norm to weighted input norm for every family
/// member and every inequality of the lemma.
pub fn weighted_bound_report(lemma: Lemma, params: &LemmaParams, family: &[TimeSeriesField]) -> Result<BoundReport> {
    let first = family.first().ok_or(Error::EmptySeries)?;
    let pairs = lemma_pairs(lemma, params, first.grid().dim())?;
    let mut reports = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let ratios = family
            .par_iter()
            .map(|f| -> Result<f64> {
                let input = weighted_norm(f, pair.in_weight, pair.in_space, pair.in_time)?;
                let out = apply(pair.op, f)?;
                let output = weighted_norm(&out, pair.out_weight, pair.out_space, pair.out_time)?;
                Ok(if input == 0.0 { 0.0 } else { output / input })
            })
            .collect::<Result<Vec<_>>>()?;
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        reports.push(PairReport { pair, ratios, max_ratio });
    }
    Ok(BoundReport { lemma, params: *params, pairs: reports })
}

/// Deterministic family of smooth, mean-zero, band-limited time series.
///
/// Member parameters are drawn from `seed` independently of the grid and of
/// the time resolution, so the same family can be sampled at any `(M, K)`.
pub fn random_family(
    grid: Grid,
    t_end: f64,
    steps: usize,
    components: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<TimeSeriesField>> {
    let kmax = 3i64;
    let dim = grid.dim();
    let mut wave: Vec<[i64; 3]> = Vec::new();
    let range = -kmax..=kmax;
    for a in range.clone() {
        for b in range.clone() {
            for c in if dim == 3 { range.clone() } else { 0..=0 } {
                let k = [a, b, c];
                if k != [0, 0, 0] {
                    wave.push(k);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        // amplitude, phase, linear drift, oscillation amplitude and frequency per (mode, component)
        let params: Vec<[f64; 5]> = (0..wave.len() * components)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(1.0..8.0),
                ]
            })
            .collect();
        let base = grid.base_frequency();
        let series = TimeSeriesField::sample(t_end, steps, |t| {
            SpectralField::from_fn(grid, components, |x, o| {
                for (c, slot) in o.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (m, k) in wave.iter().enumerate() {
                        let [amp, phase, drift, osc, freq] = params[c * wave.len() + m];
                        let kx: f64 = (0..dim).map(|j| base * k[j] as f64 * x[j]).sum();
                        let norm = (k.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
                        acc += amp / norm * (1.0 + drift * t + osc * (freq * t).sin()) * (kx + phase).cos();
                    }
                    *slot = acc;
                }
            })
        })?;
        out.push(series);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::periodic(2, 16).unwrap()
    }

    fn mode(g: Grid) -> SpectralField {
        SpectralField::from_fn(g, 1, |x, o| o[0] = (2.0 * x[0] + x[1]).cos())
    }

    #[test]
    fn phi_pair_branches_agree() {
        for z in [1e-2, 5e-3, 1e-6] {
            let (a, b) = phi_pair(z);
            let e = (-z).exp();
            let a_ref = -(-z).exp_m1() / z;
            assert!((a - a_ref).abs() < 1e-14);
            if z >= 5e-3 {
                let b_ref = (1.0 - e * (1.0 + z)) / (z * z);
                assert!((b - b_ref).abs() < 1e-9);
            }
        }
        assert_eq!(phi_pair(0.0), (1.0, 0.5));
    }

    #[test]
    fn constant_in_time_mode() {
        let g = grid();
        let f0 = mode(g);
        let f = TimeSeriesField::sample(0.5, 10, |_| f0.clone()).unwrap();
        let mu = 5.0;
        let c = op_c(&f).unwrap();
        let a = op_a(&f).unwrap();
        for (t, (cf, af)) in f.times().iter().zip(c.fields().iter().zip(a.fields())) {
            let s = (1.0 - (-mu * t).exp()) / mu;
            assert!(cf.max_abs_diff(&f0.scale(s)) < 1e-13);
            assert!(af.max_abs_diff(&f0.scale(-mu * s)) < 1e-13);
        }
    }

    #[test]
    fn empty_series_rejected() {
        assert!(matches!(TimeSeriesField::new(vec![], vec![]), Err(Error::EmptySeries)));
    }

    #[test]
    fn weighted_norm_degenerate_weight() {
        let g = grid();
        let f = TimeSeriesField::sample(1.0, 8, |t| mode(g).scale(1.0 + t)).unwrap();
        let a = weighted_norm(&f, 0.0, 2.0, 3.0).unwrap();
        let norms: Vec<f64> = f.fields().iter().map(|x| x.l2_norm()).collect();
        let mut s = 0.0;
        for k in 0..8 {
            s += 0.0625 * (norms[k].powi(3) + norms[k + 1].powi(3));
        }
        assert!((a - s.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn hypotheses_are_named() {
        let mut p = Lemma::WeightedHeat.default_params(2);
        p.q = 2.5;
        let err = lemma_pairs(Lemma::WeightedHeat, &p, 2).unwrap_err();
        assert!(err.to_string().contains("N/2"));
        for l in Lemma::ALL {
            assert!(lemma_pairs(l, &l.default_params(2), 2).is_ok(), "{l}");
            assert!(lemma_pairs(l, &l.default_params(3), 3).is_ok(), "{l} in 3D");
        }
    }

    #[test]
    fn lemma_labels_round_trip() {
        for l in Lemma::ALL {
            assert_eq!(l.label().parse::<Lemma>().unwrap(), l);
        }
        assert!("9.9".parse::<Lemma>().is_err());
    }
}
