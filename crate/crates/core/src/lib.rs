//! Optimal approximate designs of experiments on finite design spaces.
//!
//! The main entry point is [`solvers::solve`], which runs the randomized
//! exchange algorithm (REX) for D- or A-optimality. Vertex exchange and
//! multiplicative baselines share the same configuration and trajectory
//! types. [`mvee`] solves the origin-centred minimum-volume enclosing
//! ellipsoid through its D-optimal design dual, and [`models`] generates
//! benchmark design spaces and runs timed comparisons.

// `!(x > tol)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod design;
pub mod error;
pub mod models;
pub mod mvee;
pub mod solvers;
pub mod steps;

pub use criteria::{Criterion, EffBound};
pub use design::{CrossTerms, Design, DesignSpace, SolverState};
pub use error::{Error, Result};
pub use solvers::{Algorithm, SolveOutcome, SolverConfig, TerminationReason, Trajectory};
pub use steps::{StepBranch, StepResult};
