//! Config-driven runs: solve and certify, convergence studies, and kernel
//! verification. The `semilinear` binary is a thin wrapper around this.

mod config;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::error::{OperatorError, SolveError};

pub use config::{
    parse_config, parse_config_str, CertificateSpec, DomainSpec, EquationSpec, KernelSpec,
    NonlinearitySpec, OutputSpec, RunConfig, SolverSpec,
};
pub use run::{
    catalog_listing, run_convergence_study, run_kernel_check, run_solve, write_json, CatalogEntry,
    KernelCheckReport, LevelSummary, RunOutcome, RunReport, StudyReport, Timings,
    TruncationSummary, YukawaMassCheck,
};

/// Process exit codes.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const NOT_CONVERGED: i32 = 2;
    pub const CERTIFICATE_FAILED: i32 = 3;
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("kernel check requires a 3D domain (got dim {0})")]
    Unsupported(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Solve(_) => exit_code::NOT_CONVERGED,
            _ => exit_code::VALIDATION,
        }
    }
}
