//! Periodic-grid fields and Fourier-multiplier primitives.

pub mod fft;
mod field;
mod grid;
mod ops;
pub mod snapshot;

pub use field::SpectralField;
pub use grid::{Grid, Modes, PhysicalConstants};
pub use ops::{
    advect, derivative, divergence, divergence_norm, gradient, gradient_outer, heat_semigroup, laplacian,
    leray_project, riesz_riesz, scalar_times, squared_norm,
};
