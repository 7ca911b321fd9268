//! Q1/Q2 Lagrange spaces, constraints, quadrature and transfer operators.

pub mod constraints;
pub mod dofmap;
pub mod overlay;
pub mod quadrature;
pub mod shape;
pub mod transfer;

pub use constraints::{ConstraintKind, ConstraintLine, ConstraintSet};
pub use dofmap::{build_space, DofMap, HangingNode};
pub use quadrature::{gauss_legendre, QuadRule, TimeRule};
pub use shape::{shape_all, shape_eval};
pub use transfer::{
    spatial_interp_down, spatial_reconstruct_up, temporal_interp_down, temporal_reconstruct_up,
};
