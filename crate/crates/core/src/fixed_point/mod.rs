//! Fixed points of `T(u) = -A⁻¹ F(u)`.
//!
//! Existence comes from a compactness argument that gives no iteration, so
//! damped Picard (optionally Anderson-accelerated) is used to find the fixed
//! point. Non-convergence is reported as a status, never hidden. Newton's
//! method on `A u + F(u) = 0` is available as a cross-check for smooth maps.

mod anderson;
mod newton;

use serde::{Deserialize, Serialize};

use crate::elliptic::ShiftedLaplacian;
use crate::error::SolveError;
use crate::grid::GridField;
use crate::nonlinearity::ScalarMap;

pub use anderson::AndersonMixer;
pub use newton::newton_solve;

/// Smallest damping factor reached by halving.
pub const THETA_FLOOR: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    #[default]
    Zero,
    Constant(f64),
    Field(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub theta: f64,
    pub anderson_depth: usize,
    pub tol_update: f64,
    pub tol_residual: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            anderson_depth: 0,
            tol_update: 1e-10,
            tol_residual: 1e-10,
            max_iter: 500,
            initial_guess: InitialGuess::Zero,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let mut problems = Vec::new();
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            problems.push(format!("theta must lie in (0, 1] (got {})", self.theta));
        }
        if !(self.tol_update > 0.0 && self.tol_update.is_finite()) {
            problems.push(format!(
                "tol_update must be positive (got {})",
                self.tol_update
            ));
        }
        if !(self.tol_residual > 0.0 && self.tol_residual.is_finite()) {
            problems.push(format!(
                "tol_residual must be positive (got {})",
                self.tol_residual
            ));
        }
        if self.max_iter == 0 {
            problems.push("max_iter must be at least 1".to_string());
        }
        match &self.initial_guess {
            InitialGuess::Constant(c) if !c.is_finite() => {
                problems.push("initial guess constant must be finite".to_string())
            }
            InitialGuess::Field(v) if v.iter().any(|x| !x.is_finite()) => {
                problems.push("initial guess field must be finite".to_string())
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SolveError::Options(problems.join("; ")))
        }
    }

    pub fn initial_field(&self, op: &ShiftedLaplacian) -> Result<GridField, SolveError> {
        let d = op.domain();
        Ok(match &self.initial_guess {
            InitialGuess::Zero => GridField::zeros(d),
            InitialGuess::Constant(c) => GridField::constant(d, *c),
            InitialGuess::Field(v) => GridField::from_values(d, v.clone())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterReached,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `sup |A u + F(u)|` at the initial guess.
    pub initial_residual: f64,
    /// `sup |A u + F(u)|` after each iteration.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub final_update: f64,
    pub mu: Option<f64>,
    /// Damping (Picard) or line-search step (Newton) used at each iteration.
    pub theta_trace: Vec<f64>,
}

impl SolveReport {
    fn new(method: &str, mu: Option<f64>, initial_residual: f64) -> Self {
        Self {
            method: method.to_string(),
            status: SolveStatus::MaxIterReached,
            iterations: 0,
            initial_residual,
            residual_history: Vec::new(),
            final_residual: initial_residual,
            final_update: f64::INFINITY,
            mu,
            theta_trace: Vec::new(),
        }
    }

    fn record(&mut self, residual: f64, update: f64, theta: f64) {
        self.iterations += 1;
        self.residual_history.push(residual);
        self.theta_trace.push(theta);
        self.final_residual = residual;
        self.final_update = update;
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Two-column `iteration,residual` CSV.
    pub fn write_residual_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,residual")?;
        writeln!(out, "0,{:e}", self.initial_residual)?;
        for (i, r) in self.residual_history.iter().enumerate() {
            writeln!(out, "{},{:e}", i + 1, r)?;
        }
        Ok(())
    }
}

/// `map` applied at every node.
pub fn map_field(map: &(impl ScalarMap + ?Sized), u: &GridField) -> GridField {
    u.map(|v| map.value(v))
}

/// `A u + F(u)`.
pub fn residual_field(
    op: &ShiftedLaplacian,
    map: &(impl ScalarMap + ?Sized),
    u: &GridField,
) -> Result<GridField, SolveError> {
    let mut r = op.apply(u)?;
    for (ri, &ui) in r.values_mut().iter_mut().zip(u.values()) {
        *ri += map.value(ui);
    }
    Ok(r)
}

pub fn residual_sup(
    op: &ShiftedLaplacian,
    map: &(impl ScalarMap + ?Sized),
    u: &GridField,
) -> Result<f64, SolveError> {
    Ok(residual_field(op, map, u)?.sup_norm())
}

/// `T(u) = -A⁻¹ F(u)`.
pub fn apply_t(
    op: &ShiftedLaplacian,
    map: &(impl ScalarMap + ?Sized),
    u: &GridField,
) -> Result<GridField, SolveError> {
    let fu = map_field(map, u);
    Ok(op.green_apply(&fu)?.scale(-1.0))
}

/// Damped Picard iteration `u <- (1 - θ) u + θ T(u)`.
///
/// `θ` is halved (down to [`THETA_FLOOR`]) whenever the sup-norm residual
/// grows. With `anderson_depth > 0` the damped step is replaced by an
/// Anderson-mixed one over that many previous iterates; the history is
/// cleared whenever `θ` is halved.
pub fn picard_solve(
    op: &ShiftedLaplacian,
    map: &(impl ScalarMap + ?Sized),
    opts: &SolverOptions,
) -> Result<(GridField, SolveReport), SolveError> {
    opts.validate()?;
    let mut u = opts.initial_field(op)?;
    let r0 = residual_sup(op, map, &u)?;
    let mut report = SolveReport::new("picard", map.sup_bound(), r0);
    if !r0.is_finite() {
        report.status = SolveStatus::Diverged;
        return Ok((u, report));
    }

    let mut theta = opts.theta;
    let mut previous = r0;
    let mut mixer = AndersonMixer::new(opts.anderson_depth);
    for _ in 0..opts.max_iter {
        let tu = apply_t(op, map, &u)?;
        let g: Vec<f64> = tu
            .values()
            .iter()
            .zip(u.values())
            .map(|(t, x)| t - x)
            .collect();
        let next_values = mixer.step(u.values(), &g, theta);
        let next = GridField::from_values(op.domain(), next_values)?;
        let update = next.sup_distance(&u)?;
        let residual = if next.is_finite() {
            residual_sup(op, map, &next)?
        } else {
            f64::NAN
        };
        report.record(residual, update, theta);
        u = next;

        if !residual.is_finite() || !update.is_finite() {
            report.status = SolveStatus::Diverged;
            return Ok((u, report));
        }
        if residual <= opts.tol_residual && update <= opts.tol_update {
            report.status = SolveStatus::Converged;
            return Ok((u, report));
        }
        if residual > previous {
            theta = (0.5 * theta).max(THETA_FLOOR);
            mixer.reset();
        }
        previous = residual;
    }
    report.status = SolveStatus::MaxIterReached;
    Ok((u, report))
}
