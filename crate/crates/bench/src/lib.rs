//! Fixtures shared by the kernel benchmarks.

use lcflow::duhamel::TimeSeriesField;
use lcflow::scenarios::{random_small, Scenario};
use lcflow::solver::SchemeConfig;
use lcflow::{Grid, SpectralField};

pub fn grid(m: usize) -> Grid {
    Grid::periodic(2, m).expect("valid grid")
}

/// Small random data with `eta = 0.01` and its scheme settings.
pub fn small_data(m: usize, steps: usize) -> (Scenario, SchemeConfig) {
    let cfg = SchemeConfig { t_end: 0.25, dt: Some(0.25 / steps as f64), ..Default::default() };
    (random_small(grid(m), 0.01, 1, &cfg).expect("scenario"), cfg)
}

/// A fresh (uncached) copy so each FFT is actually computed.
pub fn uncached(f: &SpectralField) -> SpectralField {
    SpectralField::from_values(*f.grid(), f.components(), f.values().to_vec()).expect("finite")
}

/// `(1 + t) f` sampled on `steps` intervals of `[0, 1]`.
pub fn frozen_series(f: &SpectralField, steps: usize) -> TimeSeriesField {
    TimeSeriesField::sample(1.0, steps, |t| f.scale(1.0 + t)).expect("series")
}
