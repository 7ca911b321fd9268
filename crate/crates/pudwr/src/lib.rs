//! Space-time adaptive finite elements for parabolic problems with
//! partition-of-unity dual weighted residual error estimation.
//!
//! The pipeline for one adaptive loop is: [`solver::solve_primal`],
//! [`solver::solve_adjoint`], [`estimator::estimate`], and
//! [`adaptivity::mark_and_refine`]. [`cli_io`] wires the shipped
//! configurations to that loop.

pub mod adaptivity;
pub mod cli_io;
pub mod error;
pub mod estimator;
pub mod fespace;
pub mod goals;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod solver;
