//! Lagrangian coordinates: flow maps, the inverse Jacobian `A`, the pulled
//! back system and the difference identities used for uniqueness.

mod delta;
mod flow;
pub mod matrix;
mod stokes;
mod transform;

pub use delta::{accumulated_gradient, delta_a_identity, delta_sources, neumann_a, DeltaAReport, DeltaSources};
pub use flow::{flow_map, FlowMap, InverseSource, NEUMANN_MAX_TERMS, NEUMANN_TOL};
pub use matrix::NeumannInverse;
pub use stokes::{stokes_div_block_solve, StokesSolution};
pub use transform::{
    lagrangian_residuals, pressure_from_gradient, to_lagrangian, velocity_gradient_discrepancy, LagrangianResiduals,
    LagrangianState,
};
