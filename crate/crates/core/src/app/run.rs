use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::{exit_code, AppError};
use crate::certificates::{certify, default_amplitude_tolerance, CertificateReport};
use crate::elliptic::{verify_kernel_bound, yukawa_mass, KernelBoundReport, QuadratureSpec};
use crate::fixed_point::{picard_solve, InitialGuess, SolveReport, SolveStatus};
use crate::grid::GridField;
use crate::nonlinearity::{
    builtin_catalog, check_sign_condition, truncate, ContinuityReport, Discontinuity,
    SignConditionReport,
};

/// Relative tolerance of the `∫ yukawa = 1/k²` sub-check.
pub const YUKAWA_MASS_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationSummary {
    pub a: f64,
    pub f_at_plus_a: f64,
    pub f_at_minus_a: f64,
    pub mu: f64,
    /// `mu / k²`, the radius of the ball `T` maps into itself.
    pub ball_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Timings {
    pub validate_s: f64,
    pub solve_s: f64,
    pub certify_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub config: RunConfig,
    /// `success`, `sign_condition_failed`, `continuity_failed`,
    /// `not_converged` or `certificate_failed`.
    pub outcome: String,
    pub exit_code: i32,
    pub sign_condition: SignConditionReport,
    pub continuity: ContinuityReport,
    pub truncation: Option<TruncationSummary>,
    pub solve: Option<SolveReport>,
    pub certificates: Option<CertificateReport>,
    pub timings: Timings,
    /// SHA-256 over everything above except `timings`, plus the solution.
    pub hash: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub solution: Option<GridField>,
    pub exit_code: i32,
}

#[derive(Serialize)]
struct HashInput<'a> {
    version: &'a str,
    config: &'a RunConfig,
    outcome: &'a str,
    sign_condition: &'a SignConditionReport,
    continuity: &'a ContinuityReport,
    truncation: &'a Option<TruncationSummary>,
    solve: &'a Option<SolveReport>,
    certificates: &'a Option<CertificateReport>,
    solution_bits: Vec<u64>,
}

fn run_hash(report: &RunReport, solution: Option<&GridField>) -> String {
    let input = HashInput {
        version: &report.version,
        config: &report.config,
        outcome: &report.outcome,
        sign_condition: &report.sign_condition,
        continuity: &report.continuity,
        truncation: &report.truncation,
        solve: &report.solve,
        certificates: &report.certificates,
        solution_bits: solution
            .map(|u| u.values().iter().map(|v| v.to_bits()).collect())
            .unwrap_or_default(),
    };
    let bytes = serde_json::to_vec(&input).expect("report serializes");
    format!("{:x}", Sha256::digest(bytes))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> AppError {
    AppError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

/// Pretty-prints `value` to `path`, creating parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| AppError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| io_error(path, e))
}

/// truncate → sign check → assemble → Picard → certificates → persist.
///
/// Relative output paths resolve against `base_dir`. The report JSON is
/// written in every outcome that gets past config validation; the solution
/// CSV whenever a solve ran.
pub fn run_solve(config: &RunConfig, base_dir: &Path) -> Result<RunOutcome, AppError> {
    config.validate().map_err(AppError::Validation)?;
    let started = Instant::now();
    let raw = config.build_nonlinearity()?;
    let a = raw.threshold_a();
    let u_max = config.certificates.sign_window(a);
    let samples = config.certificates.sign_samples;
    let invalid = |e: crate::error::NonlinearityError| AppError::Validation(vec![e.to_string()]);
    let sign_condition = check_sign_condition(&raw, a, u_max, samples).map_err(invalid)?;
    let continuity = raw.check_continuity(u_max, samples).map_err(invalid)?;
    let mut timings = Timings {
        validate_s: started.elapsed().as_secs_f64(),
        ..Timings::default()
    };

    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        outcome: String::new(),
        exit_code: exit_code::SUCCESS,
        sign_condition,
        continuity,
        truncation: None,
        solve: None,
        certificates: None,
        timings,
        hash: String::new(),
    };
    let report_path = resolve(base_dir, &config.output.report_json);

    if !sign_condition.passed || !continuity.passed {
        report.outcome = if sign_condition.passed {
            "continuity_failed"
        } else {
            "sign_condition_failed"
        }
        .to_string();
        report.exit_code = exit_code::VALIDATION;
        timings.total_s = started.elapsed().as_secs_f64();
        report.timings = timings;
        report.hash = run_hash(&report, None);
        write_json(&report_path, &report)?;
        return Ok(RunOutcome {
            exit_code: report.exit_code,
            report,
            solution: None,
        });
    }

    let big_f = truncate(&raw);
    let op = config.operator()?;
    report.truncation = Some(TruncationSummary {
        a,
        f_at_plus_a: big_f.f_at_plus_a(),
        f_at_minus_a: big_f.f_at_minus_a(),
        mu: big_f.mu(),
        ball_radius: big_f.mu() / (op.k() * op.k()),
    });

    let t0 = Instant::now();
    let (u, solve) = picard_solve(&op, &big_f, &config.solver.options())?;
    timings.solve_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let certificates = certify(
        &op,
        &raw,
        &big_f,
        big_f.mu(),
        a,
        &u,
        &config.certificates.tolerances(),
    )?;
    timings.certify_s = t1.elapsed().as_secs_f64();

    report.exit_code = if solve.status != SolveStatus::Converged {
        report.outcome = "not_converged".into();
        exit_code::NOT_CONVERGED
    } else if !certificates.all_pass() {
        report.outcome = "certificate_failed".into();
        exit_code::CERTIFICATE_FAILED
    } else {
        report.outcome = "success".into();
        exit_code::SUCCESS
    };
    report.solve = Some(solve);
    report.certificates = Some(certificates);

    let csv_path = resolve(base_dir, &config.output.solution_csv);
    let mut out = create(&csv_path)?;
    u.write_csv(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| io_error(&csv_path, e))?;
    if let (Some(path), Some(solve)) = (&config.output.residual_csv, &report.solve) {
        let path = resolve(base_dir, path);
        let mut out = create(&path)?;
        solve
            .write_residual_csv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| io_error(&path, e))?;
    }

    timings.total_s = started.elapsed().as_secs_f64();
    report.timings = timings;
    report.hash = run_hash(&report, Some(&u));
    write_json(&report_path, &report)?;
    Ok(RunOutcome {
        exit_code: report.exit_code,
        report,
        solution: Some(u),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub cells: Vec<usize>,
    pub h: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_residual: f64,
    pub sup_u: f64,
    /// `max(0, sup |u| - a)`.
    pub overshoot: f64,
    /// `10 h²`, the amplitude slack at this level.
    pub overshoot_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub label: String,
    pub a: f64,
    pub levels: Vec<LevelSummary>,
    /// `sup` over the coarser level's nodes of `|u_j - u_{j+1}|`.
    pub differences: Vec<f64>,
    /// `log2(d_j / d_{j+1})`.
    pub orders: Vec<f64>,
    /// Order from the two finest differences.
    pub observed_order: Option<f64>,
    /// Every level converged.
    pub complete: bool,
    pub overshoot_nonincreasing: bool,
    pub overshoot_within_bound: bool,
}

/// Solves on `levels` grids, each doubling the cells of the previous along
/// every axis, and estimates the order of convergence from differences at
/// shared nodes.
pub fn run_convergence_study(config: &RunConfig, levels: usize) -> Result<StudyReport, AppError> {
    if levels < 3 {
        return Err(AppError::Validation(vec![format!(
            "a convergence study needs at least 3 levels (got {levels})"
        )]));
    }
    config.validate().map_err(AppError::Validation)?;
    if matches!(config.solver.initial_guess, InitialGuess::Field(_)) {
        return Err(AppError::Validation(vec![
            "a supplied initial field cannot be reused across refinement levels".into(),
        ]));
    }
    let raw = config.build_nonlinearity()?;
    let a = raw.threshold_a();
    let big_f = truncate(&raw);
    let opts = config.solver.options();

    let mut domain = config.box_domain()?;
    let mut fields: Vec<GridField> = Vec::with_capacity(levels);
    let mut summaries = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            domain = domain
                .refined(2)
                .map_err(|e| AppError::Validation(vec![e.to_string()]))?;
        }
        let op = crate::elliptic::assemble(&domain, config.equation.k)?
            .with_solver(config.solver.linear_solver);
        let (u, solve) = picard_solve(&op, &big_f, &opts)?;
        let sup_u = u.sup_norm();
        let h = domain.max_spacing();
        summaries.push(LevelSummary {
            cells: domain.cells().to_vec(),
            h,
            status: solve.status,
            iterations: solve.iterations,
            final_residual: solve.final_residual,
            sup_u,
            overshoot: (sup_u - a).max(0.0),
            overshoot_bound: default_amplitude_tolerance(&domain),
        });
        fields.push(u);
    }

    let mut differences = Vec::with_capacity(levels - 1);
    for pair in fields.windows(2) {
        let coarse = pair[0].domain();
        let restricted = pair[1]
            .restrict_to(coarse, 2)
            .map_err(crate::error::SolveError::from)?;
        differences.push(
            pair[0]
                .sup_distance(&restricted)
                .map_err(crate::error::SolveError::from)?,
        );
    }
    let orders: Vec<f64> = differences
        .windows(2)
        .map(|d| (d[0] / d[1]).log2())
        .collect();
    Ok(StudyReport {
        label: raw.label().to_string(),
        a,
        complete: summaries.iter().all(|s| s.status == SolveStatus::Converged),
        overshoot_nonincreasing: summaries
            .windows(2)
            .all(|w| w[1].overshoot <= w[0].overshoot),
        overshoot_within_bound: summaries.iter().all(|s| s.overshoot <= s.overshoot_bound),
        observed_order: orders.last().copied(),
        levels: summaries,
        differences,
        orders,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YukawaMassCheck {
    pub k: f64,
    pub value: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCheckReport {
    pub cells: Vec<usize>,
    pub k: f64,
    pub slack: f64,
    pub sources: Vec<KernelBoundReport>,
    pub yukawa_mass: YukawaMassCheck,
    pub pass: bool,
}

/// Kernel-bound check at each requested source node (explicit indices or
/// `kernel.sources` distinct nodes drawn with `kernel.seed`) plus the
/// `1/k²` mass identity.
pub fn run_kernel_check(config: &RunConfig) -> Result<KernelCheckReport, AppError> {
    let dim = config.domain.lengths.len();
    if dim != 3 {
        return Err(AppError::Unsupported(dim));
    }
    config.validate().map_err(AppError::Validation)?;
    let op = config.operator()?;
    let n = op.domain().interior_count();
    let spec = &config.kernel;
    let sources: Vec<usize> = match &spec.source_indices {
        Some(explicit) => {
            if let Some(bad) = explicit.iter().find(|&&i| i >= n) {
                return Err(AppError::Validation(vec![format!(
                    "kernel.source_indices contains {bad}, but there are only {n} interior nodes"
                )]));
            }
            explicit.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rand::seq::index::sample(&mut rng, n, spec.sources.min(n)).into_vec()
        }
    };
    let reports = sources
        .iter()
        .map(|&s| verify_kernel_bound(&op, s, spec.slack))
        .collect::<Result<Vec<_>, _>>()?;

    let k = op.k();
    let value = yukawa_mass(k, QuadratureSpec::default())?;
    let expected = 1.0 / (k * k);
    let relative_error = (value - expected).abs() / expected;
    let mass = YukawaMassCheck {
        k,
        value,
        expected,
        relative_error,
        tol: YUKAWA_MASS_REL_TOL,
        pass: relative_error <= YUKAWA_MASS_REL_TOL,
    };
    Ok(KernelCheckReport {
        cells: op.domain().cells().to_vec(),
        k,
        slack: spec.slack,
        pass: mass.pass && reports.iter().all(|r| r.pass),
        sources: reports,
        yukawa_mass: mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub label: String,
    pub formula: String,
    pub a: f64,
    pub discontinuities: Vec<Discontinuity>,
}

pub fn catalog_listing() -> Vec<CatalogEntry> {
    builtin_catalog()
        .into_iter()
        .map(|f| {
            let formula = match f.rule() {
                crate::nonlinearity::Rule::Builtin(b) => b.formula().to_string(),
                _ => String::new(),
            };
            CatalogEntry {
                label: f.label().to_string(),
                formula,
                a: f.threshold_a(),
                discontinuities: f.discontinuities().to_vec(),
            }
        })
        .collect()
}
