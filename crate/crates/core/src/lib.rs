//! Real-time tracking of critical points of parametric multi-convex programs.
//!
//! The crate provides
//!
//! * [`program`]: the problem class (block-convex quadratic objective,
//!   pairwise-bilinear equality constraint affine in the parameter, convex
//!   sets per block) with its augmented Lagrangian and KKT residual;
//! * [`sets`]: projections and weighted proximal maps of the supported sets;
//! * [`solver`]: the tracking iteration (a fixed number of proximal
//!   Gauss-Seidel sweeps and one dual update per time step), its lifted
//!   variant, and a run-to-convergence reference solver;
//! * [`nmpc`]: NMPC for constrained bilinear models, the DC-motor benchmark
//!   and closed-loop simulation;
//! * [`diagnostics`]: experiment drivers measuring tracking error, contraction,
//!   convergence rate in `M` and the effect of the sampling period.

pub mod diagnostics;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod layout;
mod linalg;
pub mod nmpc;
pub mod program;
pub mod sets;
pub mod solver;

pub use nalgebra;

pub use error::{Error, Result};
pub use layout::{BlockLayout, BlockVector, PrimalDualPoint};
pub use program::{BilinearConstraint, ConstraintRow, MultiConvexProgram, QuadraticObjective};
pub use sets::{project, prox_weighted, ConvexSet};
pub use solver::{
    solve_to_convergence, track_step, OracleOptions, OracleSolution, SolverPath, StepReport, TrackerConfig,
    TrackerState,
};
