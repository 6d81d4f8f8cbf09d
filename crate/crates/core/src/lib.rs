//! Solver and certificate toolkit for the semilinear Dirichlet problem
//!
//! ```text
//! (-Δ + k²) u + f(u) = 0  in D,    u = 0  on ∂D
//! ```
//!
//! on axis-aligned boxes. `f` only has to satisfy the sign condition
//! `u f(u) >= 0` for `|u| >= a`; it may grow arbitrarily fast and may jump
//! finitely often inside `[-a, a]`. The solver truncates `f` to a bounded
//! `F`, finds a fixed point of `T(u) = -A⁻¹ F(u)`, and the certificates check
//! that the result obeys `sup |u| <= mu/k²` and `|u| <= a`, so that it also
//! solves the untruncated problem.

// Stencil loops index several arrays by the same axis/node; `!(x > 0.0)`
// is used on purpose so that NaN is rejected along with nonpositive values.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod certificates;
pub mod elliptic;
pub mod error;
pub mod fixed_point;
pub mod grid;
pub mod nonlinearity;

pub use certificates::{certify, CertificateReport, CertificateTolerances};
pub use elliptic::{assemble, LinearSolver, ShiftedLaplacian};
pub use error::{GridError, NonlinearityError, OperatorError, SolveError};
pub use fixed_point::{
    apply_t, newton_solve, picard_solve, InitialGuess, SolveReport, SolveStatus, SolverOptions,
};
pub use grid::{BoxDomain, GridField};
pub use nonlinearity::{
    builtin_catalog, check_sign_condition, truncate, Builtin, Discontinuity, Nonlinearity,
    ScalarMap, TruncatedNonlinearity,
};
