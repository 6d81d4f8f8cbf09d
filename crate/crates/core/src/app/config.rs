//! Run configuration: a TOML file with the sections `[domain]`,
//! `[equation]`, `[nonlinearity]`, `[solver]`, `[output]`,
//! `[certificates]` and `[kernel]`. Only the first three are required.
//!
//! ```toml
//! [domain]
//! lengths = [1.0]
//! cells = [128]
//!
//! [equation]
//! k = 1.0
//!
//! [nonlinearity]
//! builtin = "cubic_shift"      # or: piecewise = [[-1.0, 1.0], [1.0, -1.0]] with a = ...
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::certificates::CertificateTolerances;
use crate::elliptic::{assemble, LinearSolver, ShiftedLaplacian};
use crate::fixed_point::{InitialGuess, SolverOptions};
use crate::grid::BoxDomain;
use crate::nonlinearity::{Builtin, Discontinuity, Nonlinearity, MIN_SIGN_SAMPLES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub equation: EquationSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub certificates: CertificateSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSpec {
    pub k: f64,
}

/// Either `builtin = "<label>"` (optionally overriding `a`) or
/// `piecewise = [[u, f(u)], ...]` with `a` and an optional discontinuity
/// list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piecewise: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discontinuities: Vec<Discontinuity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub theta: f64,
    pub anderson_depth: usize,
    pub tol_update: f64,
    pub tol_residual: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
    pub linear_solver: LinearSolver,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            theta: o.theta,
            anderson_depth: o.anderson_depth,
            tol_update: o.tol_update,
            tol_residual: o.tol_residual,
            max_iter: o.max_iter,
            initial_guess: o.initial_guess,
            linear_solver: LinearSolver::Auto,
        }
    }
}

impl SolverSpec {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            theta: self.theta,
            anderson_depth: self.anderson_depth,
            tol_update: self.tol_update,
            tol_residual: self.tol_residual,
            max_iter: self.max_iter,
            initial_guess: self.initial_guess.clone(),
        }
    }
}

/// Output paths; relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub solution_csv: PathBuf,
    pub report_json: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study_json: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_json: Option<PathBuf>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            solution_csv: PathBuf::from("solution.csv"),
            report_json: PathBuf::from("report.json"),
            residual_csv: None,
            study_json: None,
            kernel_json: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateSpec {
    pub residual: f64,
    pub apriori: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    pub energy: f64,
    /// Sign-condition window `[-u_max, u_max]`; defaults to `10 max(a, 1)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_u_max: Option<f64>,
    pub sign_samples: usize,
}

impl Default for CertificateSpec {
    fn default() -> Self {
        let t = CertificateTolerances::default();
        Self {
            residual: t.residual,
            apriori: t.apriori,
            amplitude: t.amplitude,
            energy: t.energy,
            sign_u_max: None,
            sign_samples: 10_000,
        }
    }
}

impl CertificateSpec {
    pub fn tolerances(&self) -> CertificateTolerances {
        CertificateTolerances {
            residual: self.residual,
            apriori: self.apriori,
            amplitude: self.amplitude,
            energy: self.energy,
        }
    }

    pub fn sign_window(&self, a: f64) -> f64 {
        self.sign_u_max.unwrap_or(10.0 * a.max(1.0))
    }
}

/// Settings of the `kernel-check` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    /// Number of source nodes drawn with `seed` when `source_indices` is
    /// not given.
    pub sources: usize,
    pub seed: u64,
    pub slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_indices: Option<Vec<usize>>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            sources: 5,
            seed: 42,
            slack: 0.05,
            source_indices: None,
        }
    }
}

/// Reads and validates a config file, reporting every problem found.
pub fn parse_config(path: &Path) -> Result<RunConfig, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, AppError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| AppError::Validation(vec![e.message().to_string()]))?;
    config.validate().map_err(AppError::Validation)?;
    Ok(config)
}

impl RunConfig {
    /// Minimal config with every optional section at its default.
    pub fn new(lengths: &[f64], cells: &[usize], k: f64, builtin: &str) -> Self {
        Self {
            domain: DomainSpec {
                lengths: lengths.to_vec(),
                cells: cells.to_vec(),
            },
            equation: EquationSpec { k },
            nonlinearity: NonlinearitySpec {
                builtin: Some(builtin.to_string()),
                ..NonlinearitySpec::default()
            },
            solver: SolverSpec::default(),
            output: OutputSpec::default(),
            certificates: CertificateSpec::default(),
            kernel: KernelSpec::default(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();

        let d = &self.domain;
        if d.lengths.is_empty() || d.lengths.len() > 3 {
            errors.push(format!(
                "domain.lengths must have 1 to 3 entries (got {})",
                d.lengths.len()
            ));
        }
        if d.lengths.len() != d.cells.len() {
            errors.push(format!(
                "domain.lengths has {} entries but domain.cells has {}",
                d.lengths.len(),
                d.cells.len()
            ));
        }
        for (axis, l) in d.lengths.iter().enumerate() {
            if !(l.is_finite() && *l > 0.0) {
                errors.push(format!("domain.lengths[{axis}] must be positive (got {l})"));
            }
        }
        for (axis, n) in d.cells.iter().enumerate() {
            if *n < 2 {
                errors.push(format!("domain.cells[{axis}] must be at least 2 (got {n})"));
            }
        }

        let k = self.equation.k;
        if !(k.is_finite() && k > 0.0) {
            errors.push(format!("k must be positive (got {k})"));
        }

        let nl = &self.nonlinearity;
        let mut threshold = None;
        match (&nl.builtin, &nl.piecewise) {
            (Some(_), Some(_)) => {
                errors.push("nonlinearity: give either builtin or piecewise, not both".into())
            }
            (None, None) => errors.push("nonlinearity: builtin or piecewise is required".into()),
            (Some(label), None) => match Builtin::from_label(label) {
                Ok(b) => {
                    threshold = Some(nl.a.unwrap_or(b.default_threshold()));
                    if !nl.discontinuities.is_empty() {
                        errors.push(
                            "nonlinearity.discontinuities only applies to piecewise tables".into(),
                        );
                    }
                }
                Err(e) => errors.push(format!("nonlinearity: {e}")),
            },
            (None, Some(_)) => match nl.a {
                Some(a) => threshold = Some(a),
                None => errors.push("nonlinearity.a is required for piecewise tables".into()),
            },
        }
        if let Some(a) = threshold {
            if !(a.is_finite() && a >= 0.0) {
                errors.push(format!("a must be nonnegative (got {a})"));
            } else {
                for dj in &nl.discontinuities {
                    if dj.point.abs() > a {
                        errors.push(format!(
                            "discontinuity at u = {} lies outside [-a, a] with a = {a}",
                            dj.point
                        ));
                    }
                }
                if errors.is_empty() {
                    if let Err(e) = self.build_nonlinearity() {
                        errors.push(format!("nonlinearity: {e}"));
                    }
                }
                let u_max = self.certificates.sign_window(a);
                if !(u_max.is_finite() && u_max > a) {
                    errors.push(format!(
                        "certificates.sign_u_max must exceed a = {a} (got {u_max})"
                    ));
                }
            }
        }

        if let Err(e) = self.solver.options().validate() {
            errors.push(format!("solver: {e}"));
        }

        let c = &self.certificates;
        for (name, v) in [
            ("residual", c.residual),
            ("apriori", c.apriori),
            ("energy", c.energy),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                errors.push(format!("certificates.{name} must be nonnegative (got {v})"));
            }
        }
        if let Some(v) = c.amplitude {
            if !(v.is_finite() && v >= 0.0) {
                errors.push(format!(
                    "certificates.amplitude must be nonnegative (got {v})"
                ));
            }
        }
        if c.sign_samples < MIN_SIGN_SAMPLES {
            errors.push(format!(
                "certificates.sign_samples must be at least {MIN_SIGN_SAMPLES} (got {})",
                c.sign_samples
            ));
        }

        let kspec = &self.kernel;
        if !(kspec.slack.is_finite() && kspec.slack >= 0.0) {
            errors.push(format!(
                "kernel.slack must be nonnegative (got {})",
                kspec.slack
            ));
        }
        if kspec.sources == 0 && kspec.source_indices.is_none() {
            errors.push("kernel.sources must be at least 1".into());
        }

        let o = &self.output;
        for (name, p) in [
            ("solution_csv", &o.solution_csv),
            ("report_json", &o.report_json),
        ] {
            if p.as_os_str().is_empty() {
                errors.push(format!("output.{name} must not be empty"));
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn box_domain(&self) -> Result<BoxDomain, AppError> {
        BoxDomain::new(&self.domain.lengths, &self.domain.cells)
            .map_err(|e| AppError::Validation(vec![e.to_string()]))
    }

    pub fn operator(&self) -> Result<ShiftedLaplacian, AppError> {
        let domain = self.box_domain()?;
        Ok(assemble(&domain, self.equation.k)
            .map_err(|e| AppError::Validation(vec![e.to_string()]))?
            .with_solver(self.solver.linear_solver))
    }

    pub fn build_nonlinearity(&self) -> Result<Nonlinearity, AppError> {
        let nl = &self.nonlinearity;
        let invalid =
            |e: crate::error::NonlinearityError| AppError::Validation(vec![e.to_string()]);
        match (&nl.builtin, &nl.piecewise) {
            (Some(label), None) => {
                let b = Builtin::from_label(label).map_err(invalid)?;
                Nonlinearity::from_builtin(b, nl.a.unwrap_or(b.default_threshold()))
                    .map_err(invalid)
            }
            (None, Some(rows)) => {
                let a = nl.a.ok_or_else(|| {
                    AppError::Validation(vec!["nonlinearity.a is required".into()])
                })?;
                Nonlinearity::piecewise(
                    nl.label.clone().unwrap_or_else(|| "piecewise".into()),
                    a,
                    rows.iter().map(|r| (r[0], r[1])).collect(),
                    nl.discontinuities.clone(),
                )
                .map_err(invalid)
            }
            _ => Err(AppError::Validation(vec![
                "nonlinearity: exactly one of builtin or piecewise is required".into(),
            ])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
lengths = [1.0]
cells = [128]

[equation]
k = 1.0

[nonlinearity]
builtin = "cubic_shift"
"#;

    fn errors_of(text: &str) -> Vec<String> {
        match parse_config_str(text) {
            Err(AppError::Validation(e)) => e,
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.solver, SolverSpec::default());
        assert_eq!(c.certificates, CertificateSpec::default());
        assert_eq!(c.kernel.slack, 0.05);
        assert_eq!(c.build_nonlinearity().unwrap().threshold_a(), 1.0);
        assert_eq!(c, RunConfig::new(&[1.0], &[128], 1.0, "cubic_shift"));
    }

    #[test]
    fn zero_k_rejected() {
        let errs = errors_of(&MINIMAL.replace("k = 1.0", "k = 0.0"));
        assert!(
            errs.iter().any(|e| e.contains("k must be positive")),
            "{errs:?}"
        );
    }

    #[test]
    fn discontinuity_outside_band_rejected() {
        let text = r#"
[domain]
lengths = [1.0]
cells = [16]
[equation]
k = 1.0
[nonlinearity]
piecewise = [[-3.0, -3.0], [3.0, 3.0]]
a = 0.5
discontinuities = [{ point = 1.0, left = 0.0, right = 1.0 }]
"#;
        let errs = errors_of(text);
        assert!(
            errs.iter().any(|e| e.contains("outside [-a, a]")),
            "{errs:?}"
        );
    }

    #[test]
    fn reports_every_error() {
        let text = r#"
[domain]
lengths = [1.0, -2.0]
cells = [1]
[equation]
k = -1.0
[nonlinearity]
builtin = "quartic"
[solver]
theta = 2.0
[certificates]
sign_samples = 5
"#;
        let errs = errors_of(text);
        assert!(errs.len() >= 6, "{errs:?}");
        for needle in [
            "lengths[1]",
            "cells[0]",
            "domain.lengths has",
            "k must be positive",
            "quartic",
            "theta",
            "sign_samples",
        ] {
            assert!(
                errs.iter().any(|e| e.contains(needle)),
                "missing {needle}: {errs:?}"
            );
        }
    }

    #[test]
    fn negative_a_and_malformed_table() {
        let errs = errors_of(&MINIMAL.replace(
            "builtin = \"cubic_shift\"",
            "builtin = \"cubic_shift\"\na = -1.0",
        ));
        assert!(errs.iter().any(|e| e.contains("a must be nonnegative")));
        let errs = errors_of(&MINIMAL.replace(
            "builtin = \"cubic_shift\"",
            "piecewise = [[0.0, 0.0], [-1.0, 1.0]]\na = 0.5",
        ));
        assert!(
            errs.iter().any(|e| e.contains("malformed piecewise table")),
            "{errs:?}"
        );
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            parse_config(Path::new("/definitely/not/here.toml")),
            Err(AppError::Io { .. })
        ));
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::new(&[1.0, 2.5], &[16, 32], 0.75, "cubic_step");
        c.solver.initial_guess = InitialGuess::Constant(0.125);
        c.solver.anderson_depth = 3;
        c.solver.linear_solver = LinearSolver::ConjugateGradient;
        c.output.residual_csv = Some(PathBuf::from("res.csv"));
        c.certificates.amplitude = Some(1e-3);
        c.kernel.source_indices = Some(vec![1, 2, 3]);
        let back = parse_config_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);

        let mut p = RunConfig::new(&[1.0], &[8], 1.0, "x");
        p.nonlinearity = NonlinearitySpec {
            builtin: None,
            piecewise: Some(vec![[-2.0, -1.0], [0.1, 0.3], [2.0, 1.0 / 3.0]]),
            a: Some(1.5),
            discontinuities: vec![Discontinuity {
                point: 0.5,
                left: 0.1,
                right: 0.7,
            }],
            label: Some("table".into()),
        };
        p.solver.initial_guess = InitialGuess::Field(vec![0.0; 7]);
        let back = parse_config_str(&p.to_toml_string()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn unknown_keys_rejected() {
        let errs = errors_of(&format!("{MINIMAL}\n[solver]\nthetta = 0.5\n"));
        assert!(errs[0].contains("thetta"), "{errs:?}");
    }
}
