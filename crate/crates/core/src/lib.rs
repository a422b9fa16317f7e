//! Pseudospectral laboratory for the simplified Ericksen-Leslie system on a
//! periodic box: Duhamel operators, Besov norm calculus, the Picard scheme
//! and Lagrangian coordinates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod diagnostics;
pub mod duhamel;
pub mod error;
pub mod interp;
pub mod lagrangian;
pub mod scenarios;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{Grid, PhysicalConstants, SpectralField};
