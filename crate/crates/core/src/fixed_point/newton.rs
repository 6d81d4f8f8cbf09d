use super::{residual_field, SolveReport, SolveStatus, SolverOptions};
use crate::elliptic::ShiftedLaplacian;
use crate::error::SolveError;
use crate::grid::GridField;
use crate::nonlinearity::ScalarMap;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / 1024.0;

/// Newton's method on `R(u) = A u + F(u)` with a backtracking line search
/// on `sup |R|`. Same stopping contract as [`super::picard_solve`].
///
/// Maps with declared discontinuities are rejected. A Jacobian
/// `A + diag(F'(u))` that cannot be solved ends the run with
/// [`SolveStatus::Diverged`].
pub fn newton_solve(
    op: &ShiftedLaplacian,
    map: &(impl ScalarMap + ?Sized),
    opts: &SolverOptions,
) -> Result<(GridField, SolveReport), SolveError> {
    if map.has_discontinuities() {
        return Err(SolveError::Discontinuous);
    }
    opts.validate()?;
    let mut u = opts.initial_field(op)?;
    let mut r = residual_field(op, map, &u)?;
    let mut r_sup = r.sup_norm();
    let mut report = SolveReport::new("newton", map.sup_bound(), r_sup);
    if !r_sup.is_finite() {
        report.status = SolveStatus::Diverged;
        return Ok((u, report));
    }

    for _ in 0..opts.max_iter {
        let shift: Vec<f64> = u.values().iter().map(|&v| map.derivative(v)).collect();
        let rhs: Vec<f64> = r.values().iter().map(|v| -v).collect();
        let Ok(step) = op.solve_shifted(&rhs, &shift) else {
            report.status = SolveStatus::Diverged;
            return Ok((u, report));
        };
        let step = GridField::from_values(op.domain(), step)?;

        let mut lambda = 1.0;
        let (trial, trial_r, trial_sup) = loop {
            let trial = GridField::from_values(
                op.domain(),
                u.values()
                    .iter()
                    .zip(step.values())
                    .map(|(x, s)| x + lambda * s)
                    .collect(),
            )?;
            let trial_r = residual_field(op, map, &trial)?;
            let trial_sup = trial_r.sup_norm();
            let accept =
                trial_sup <= (1.0 - ARMIJO * lambda) * r_sup || trial_sup <= opts.tol_residual;
            if accept || lambda <= MIN_STEP {
                break (trial, trial_r, trial_sup);
            }
            lambda *= 0.5;
        };
        let update = lambda * step.sup_norm();
        report.record(trial_sup, update, lambda);
        u = trial;
        r = trial_r;

        if !trial_sup.is_finite() {
            report.status = SolveStatus::Diverged;
            return Ok((u, report));
        }
        if trial_sup <= opts.tol_residual && update <= opts.tol_update {
            report.status = SolveStatus::Converged;
            return Ok((u, report));
        }
        if trial_sup > r_sup {
            // no descent even at the smallest step
            report.status = SolveStatus::Diverged;
            return Ok((u, report));
        }
        r_sup = trial_sup;
    }
    report.status = SolveStatus::MaxIterReached;
    Ok((u, report))
}
