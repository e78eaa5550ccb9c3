//! Sparse recovery with the CLOT and sparse group LASSO penalties.
//!
//! * [`regularizers`]: penalties, exact proximal maps, `σ_k`.
//! * [`solvers`]: Lagrangian and noise-constrained programs, regularization paths.
//! * [`optimality`]: subgradient-inclusion checks independent of the solvers.
//! * [`rip`]: RIP → null-space → error-bound constant chain, brute-force RIP.
//! * [`matrices`]: DeVore binary matrices and test fixtures.
//! * [`grouping`]: grouping-effect verification on computed solutions.
//! * [`experiments`]: seeded reproductions of the numerical studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod grouping;
pub mod linalg;
pub mod matrices;
pub mod optimality;
pub mod regularizers;
pub mod rip;
pub mod solvers;

pub use error::{Error, Result};
pub use regularizers::{Partition, RegularizerKind, RegularizerSpec, SparsityNorm};
pub use solvers::{Form, LambdaSide, Problem, SolveResult, SolverOptions};
