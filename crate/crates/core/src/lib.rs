//! Distributed AC power flow as a zero-residual least-squares problem with
//! affine consensus constraints.
//!
//! The network is split into regions that share their tie lines. Each
//! region keeps local copies of the foreign tie-line endpoints, and
//! consensus rows `A χ = b` force copies to agree with the owning region.
//! Two coordinators solve the resulting problem:
//!
//! * [`aladin::run_standard`]: augmented-Lagrangian alternating direction
//!   inexact Newton with regularized local NLPs and a coupled QP.
//! * [`aladin::run_gn_inexact`]: a Gauss-Newton variant with the dual
//!   frozen at zero, in which both steps reduce to linear systems solved
//!   matrix-free by conjugate gradients.
//!
//! [`nr::nr_solve`] is a centralized Newton-Raphson solver used as the
//! reference.

// `!(x > 0.0)` is how settings and curvatures reject NaN along with
// non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aladin;
pub mod case_io;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod nr;
pub mod partition;
pub mod problem;
pub mod runner;
pub mod synthetic;

pub use case_io::{load_case, load_partition, PartitionSpec, RawCase};
pub use model::ModelVariant;
pub use nr::{nr_solve, PfSolution};
pub use problem::DistributedProblem;
