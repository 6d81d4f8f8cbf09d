//! Shared fixtures for the criterion benches.

use semilinear_core::{
    assemble, truncate, BoxDomain, LinearSolver, Nonlinearity, ShiftedLaplacian,
    TruncatedNonlinearity,
};

pub fn unit_operator(dim: usize, cells: usize, solver: LinearSolver) -> ShiftedLaplacian {
    let domain = BoxDomain::unit(dim, cells).expect("valid box");
    assemble(&domain, 1.0).expect("k > 0").with_solver(solver)
}

pub fn catalog_map(label: &str) -> TruncatedNonlinearity {
    truncate(&Nonlinearity::builtin(label).expect("builtin exists"))
}
