//! Scalar nonlinearities `f`, their truncation `F`, and sampled checks of the
//! standing hypotheses: the sign condition `u f(u) >= 0` for `|u| >= a`,
//! continuity outside `[-a, a]`, and finitely many declared jumps inside it.
//!
//! At a declared discontinuity `u_j` the map evaluates to the midpoint of the
//! one-sided limits so that it is total.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::NonlinearityError;

/// Minimum sample count accepted by [`check_sign_condition`].
pub const MIN_SIGN_SAMPLES: usize = 100;
/// Minimum sample count accepted by [`TruncatedNonlinearity::sup_bound`].
pub const MIN_SUP_SAMPLES: usize = 1000;
/// Sample count used when [`truncate`] computes `mu`.
pub const DEFAULT_SUP_SAMPLES: usize = 100_000;

/// Anything that can be applied pointwise to a grid function.
///
/// Implemented by both the raw nonlinearity and its truncation so the
/// solvers can run on either.
pub trait ScalarMap: Send + Sync {
    fn value(&self, u: f64) -> f64;

    /// Derivative used by Newton's method. Piecewise maps return the slope of
    /// the piece to the right of `u`.
    fn derivative(&self, u: f64) -> f64;

    fn has_discontinuities(&self) -> bool;

    /// A known bound on `sup |map|` over the reals, if one exists.
    fn sup_bound(&self) -> Option<f64>;
}

/// A declared jump `u_j` with its one-sided limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    pub point: f64,
    pub left: f64,
    pub right: f64,
}

impl Discontinuity {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.left + self.right)
    }
}

/// Closed-form nonlinearities shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `u^3 - 1`, `a = 1`.
    CubicShift,
    /// `sinh u`, `a = 0`.
    Sinh,
    /// `e^u - 2`, `a = ln 2`.
    ExpShift,
    /// `u^3 - 1 + 0.25 sign(u - 0.25)`, `a = 1`, one jump at `0.25`.
    CubicStep,
}

const CUBIC_STEP_JUMP: f64 = 0.25;
const CUBIC_STEP_HALF_HEIGHT: f64 = 0.25;

impl Builtin {
    pub const ALL: [Builtin; 4] = [
        Builtin::CubicShift,
        Builtin::Sinh,
        Builtin::ExpShift,
        Builtin::CubicStep,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Builtin::CubicShift => "cubic_shift",
            Builtin::Sinh => "sinh",
            Builtin::ExpShift => "exp_shift",
            Builtin::CubicStep => "cubic_step",
        }
    }

    pub fn from_label(label: &str) -> Result<Self, NonlinearityError> {
        Self::ALL
            .into_iter()
            .find(|b| b.label() == label)
            .ok_or_else(|| NonlinearityError::UnknownBuiltin(label.to_string()))
    }

    pub fn default_threshold(self) -> f64 {
        match self {
            Builtin::CubicShift | Builtin::CubicStep => 1.0,
            Builtin::Sinh => 0.0,
            Builtin::ExpShift => std::f64::consts::LN_2,
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            Builtin::CubicShift => "u^3 - 1",
            Builtin::Sinh => "sinh(u)",
            Builtin::ExpShift => "exp(u) - 2",
            Builtin::CubicStep => "u^3 - 1 + 0.25*sign(u - 0.25)",
        }
    }

    fn discontinuities(self) -> Vec<Discontinuity> {
        match self {
            Builtin::CubicStep => {
                let smooth = CUBIC_STEP_JUMP.powi(3) - 1.0;
                vec![Discontinuity {
                    point: CUBIC_STEP_JUMP,
                    left: smooth - CUBIC_STEP_HALF_HEIGHT,
                    right: smooth + CUBIC_STEP_HALF_HEIGHT,
                }]
            }
            _ => Vec::new(),
        }
    }

    fn eval(self, u: f64) -> f64 {
        match self {
            Builtin::CubicShift => u * u * u - 1.0,
            Builtin::Sinh => u.sinh(),
            Builtin::ExpShift => u.exp() - 2.0,
            Builtin::CubicStep => {
                let step = if u > CUBIC_STEP_JUMP {
                    CUBIC_STEP_HALF_HEIGHT
                } else if u < CUBIC_STEP_JUMP {
                    -CUBIC_STEP_HALF_HEIGHT
                } else {
                    0.0
                };
                u * u * u - 1.0 + step
            }
        }
    }

    fn derivative(self, u: f64) -> f64 {
        match self {
            Builtin::CubicShift | Builtin::CubicStep => 3.0 * u * u,
            Builtin::Sinh => u.cosh(),
            Builtin::ExpShift => u.exp(),
        }
    }
}

/// A piecewise-linear table with jumps at the declared discontinuities.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTable {
    rows: Vec<(f64, f64)>,
    // rows merged with the discontinuities: (u, value from the left, value from the right)
    knots: Vec<(f64, f64, f64)>,
}

impl PiecewiseTable {
    fn new(rows: Vec<(f64, f64)>, jumps: &[Discontinuity]) -> Result<Self, NonlinearityError> {
        if rows.len() < 2 {
            return Err(NonlinearityError::Table(
                "at least two breakpoints are required".into(),
            ));
        }
        if rows.iter().any(|(u, v)| !u.is_finite() || !v.is_finite()) {
            return Err(NonlinearityError::Table("non-finite entry".into()));
        }
        if rows.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(NonlinearityError::Table(
                "breakpoints must be strictly increasing in u".into(),
            ));
        }
        let mut knots: Vec<(f64, f64, f64)> = rows.iter().map(|&(u, v)| (u, v, v)).collect();
        for d in jumps {
            if rows.iter().any(|&(u, _)| u == d.point) {
                return Err(NonlinearityError::Table(format!(
                    "breakpoint coincides with discontinuity at u = {}",
                    d.point
                )));
            }
            knots.push((d.point, d.left, d.right));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { rows, knots })
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    fn first_u(&self) -> f64 {
        self.knots[0].0
    }

    fn last_u(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    // Index of the segment [knots[i], knots[i+1]] used at u; end segments
    // extend linearly past the table.
    fn segment(&self, u: f64) -> usize {
        let last = self.knots.len() - 2;
        match self.knots.binary_search_by(|k| k.0.total_cmp(&u)) {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        }
    }

    fn eval(&self, u: f64) -> f64 {
        if let Ok(i) = self.knots.binary_search_by(|k| k.0.total_cmp(&u)) {
            let (_, l, r) = self.knots[i];
            return if i == 0 {
                r
            } else if i == self.knots.len() - 1 {
                l
            } else {
                0.5 * (l + r)
            };
        }
        let i = self.segment(u);
        let (u0, _, v0) = self.knots[i];
        let (u1, v1, _) = self.knots[i + 1];
        v0 + (v1 - v0) * (u - u0) / (u1 - u0)
    }

    fn slope(&self, u: f64) -> f64 {
        let i = self.segment(u);
        let (u0, _, v0) = self.knots[i];
        let (u1, v1, _) = self.knots[i + 1];
        (v1 - v0) / (u1 - u0)
    }
}

/// Rule behind a [`Nonlinearity`].
#[derive(Clone)]
pub enum Rule {
    Builtin(Builtin),
    Table(PiecewiseTable),
    /// Arbitrary closed form. The derivative is approximated by central
    /// differences.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Builtin(b) => f.debug_tuple("Builtin").field(b).finish(),
            Rule::Table(t) => f.debug_tuple("Table").field(t).finish(),
            Rule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// The nonlinearity `f` with its threshold `a` and declared jumps.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    label: String,
    threshold_a: f64,
    rule: Rule,
    discontinuities: Vec<Discontinuity>,
}

impl Nonlinearity {
    pub fn new(
        label: impl Into<String>,
        threshold_a: f64,
        rule: Rule,
        discontinuities: Vec<Discontinuity>,
    ) -> Result<Self, NonlinearityError> {
        if !(threshold_a.is_finite() && threshold_a >= 0.0) {
            return Err(NonlinearityError::Threshold(threshold_a));
        }
        for d in &discontinuities {
            if !d.point.is_finite() || d.point.abs() > threshold_a {
                return Err(NonlinearityError::DiscontinuityOutsideRange {
                    point: d.point,
                    a: threshold_a,
                });
            }
            if !(d.left.is_finite() && d.right.is_finite()) {
                return Err(NonlinearityError::NonFiniteLimit(d.point));
            }
        }
        if discontinuities.windows(2).any(|w| w[0].point >= w[1].point) {
            return Err(NonlinearityError::UnorderedDiscontinuities);
        }
        Ok(Self {
            label: label.into(),
            threshold_a,
            rule,
            discontinuities,
        })
    }

    pub fn builtin(label: &str) -> Result<Self, NonlinearityError> {
        let b = Builtin::from_label(label)?;
        Self::from_builtin(b, b.default_threshold())
    }

    /// A builtin with a caller-chosen threshold. The builtin's jumps must
    /// still lie in `[-a, a]`.
    pub fn from_builtin(b: Builtin, threshold_a: f64) -> Result<Self, NonlinearityError> {
        Self::new(
            b.label(),
            threshold_a,
            Rule::Builtin(b),
            b.discontinuities(),
        )
    }

    /// Piecewise-linear nonlinearity from `(u, f(u))` breakpoints. Declared
    /// jumps split the table; beyond the last breakpoint on either side the
    /// end segment is extended linearly.
    pub fn piecewise(
        label: impl Into<String>,
        threshold_a: f64,
        rows: Vec<(f64, f64)>,
        discontinuities: Vec<Discontinuity>,
    ) -> Result<Self, NonlinearityError> {
        let table = PiecewiseTable::new(rows, &discontinuities)?;
        if table.first_u() > -threshold_a || table.last_u() < threshold_a {
            return Err(NonlinearityError::Table(format!(
                "breakpoints must cover [-a, a] = [{}, {}]",
                -threshold_a, threshold_a
            )));
        }
        Self::new(label, threshold_a, Rule::Table(table), discontinuities)
    }

    pub fn custom(
        label: impl Into<String>,
        threshold_a: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, NonlinearityError> {
        Self::new(label, threshold_a, Rule::Custom(Arc::new(g)), Vec::new())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn threshold_a(&self) -> f64 {
        self.threshold_a
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn discontinuities(&self) -> &[Discontinuity] {
        &self.discontinuities
    }

    /// `f(u)`, with the midpoint convention at declared jumps.
    pub fn evaluate(&self, u: f64) -> Result<f64, NonlinearityError> {
        if !u.is_finite() {
            return Err(NonlinearityError::NonFinite(u));
        }
        Ok(self.value(u))
    }

    /// Samples the continuity of `f` on `[-u_max, -a] ∪ [a, u_max]`.
    ///
    /// Every sample interval whose halves do not shrink is bisected towards
    /// the larger half; a gap that survives refinement is a jump.
    pub fn check_continuity(
        &self,
        u_max: f64,
        n_samples: usize,
    ) -> Result<ContinuityReport, NonlinearityError> {
        let a = self.threshold_a;
        validate_window(a, u_max, n_samples)?;
        let per_side = n_samples.div_ceil(2).max(2);
        let step = (u_max - a) / (per_side - 1) as f64;
        let mut worst: Option<(f64, f64)> = None;
        for sign in [1.0, -1.0] {
            for i in 0..per_side - 1 {
                let lo = sign * (a + i as f64 * step);
                let hi = sign * (a + (i + 1) as f64 * step);
                let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
                if let Some(gap) = self.persistent_gap(lo, hi) {
                    if worst.is_none_or(|(_, g)| gap > g) {
                        worst = Some((0.5 * (lo + hi), gap));
                    }
                }
            }
        }
        Ok(ContinuityReport {
            passed: worst.is_none(),
            jump_near: worst.map(|w| w.0),
            jump_size: worst.map(|w| w.1),
        })
    }

    fn persistent_gap(&self, mut lo: f64, mut hi: f64) -> Option<f64> {
        let (mut flo, mut fhi) = (self.value(lo), self.value(hi));
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fmid = self.value(mid);
            if (fmid - flo).abs() >= (fhi - fmid).abs() {
                hi = mid;
                fhi = fmid;
            } else {
                lo = mid;
                flo = fmid;
            }
        }
        let gap = (fhi - flo).abs();
        let scale = 1.0 + flo.abs().max(fhi.abs());
        (gap > 1e-6 * scale).then_some(gap)
    }
}

impl ScalarMap for Nonlinearity {
    fn value(&self, u: f64) -> f64 {
        if let Some(d) = self.discontinuities.iter().find(|d| d.point == u) {
            return d.midpoint();
        }
        match &self.rule {
            Rule::Builtin(b) => b.eval(u),
            Rule::Table(t) => t.eval(u),
            Rule::Custom(g) => g(u),
        }
    }

    fn derivative(&self, u: f64) -> f64 {
        match &self.rule {
            Rule::Builtin(b) => b.derivative(u),
            Rule::Table(t) => t.slope(u),
            Rule::Custom(g) => {
                let step = 1e-6 * (1.0 + u.abs());
                (g(u + step) - g(u - step)) / (2.0 * step)
            }
        }
    }

    fn has_discontinuities(&self) -> bool {
        !self.discontinuities.is_empty()
    }

    fn sup_bound(&self) -> Option<f64> {
        None
    }
}

/// Outcome of a sampled hypothesis check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignConditionReport {
    pub passed: bool,
    /// Sample with the most negative `u f(u)` when the check fails.
    pub witness: Option<f64>,
    pub witness_product: Option<f64>,
    pub u_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub passed: bool,
    pub jump_near: Option<f64>,
    pub jump_size: Option<f64>,
}

fn validate_window(a: f64, u_max: f64, n_samples: usize) -> Result<(), NonlinearityError> {
    if !(u_max.is_finite() && u_max > a) {
        return Err(NonlinearityError::InvalidRange { u_max, a });
    }
    if n_samples < MIN_SIGN_SAMPLES {
        return Err(NonlinearityError::TooFewSamples {
            min: MIN_SIGN_SAMPLES,
            got: n_samples,
        });
    }
    Ok(())
}

/// Samples `u f(u) >= 0` uniformly on `[-u_max, -a] ∪ [a, u_max]`, endpoints
/// included, with `n_samples` split evenly between the two sides.
pub fn check_sign_condition(
    f: &(impl ScalarMap + ?Sized),
    a: f64,
    u_max: f64,
    n_samples: usize,
) -> Result<SignConditionReport, NonlinearityError> {
    validate_window(a, u_max, n_samples)?;
    let per_side = n_samples.div_ceil(2);
    let step = (u_max - a) / (per_side - 1) as f64;
    let mut worst: Option<(f64, f64)> = None;
    for i in 0..per_side {
        let mag = if i + 1 == per_side {
            u_max
        } else {
            a + i as f64 * step
        };
        for u in [mag, -mag] {
            let p = u * f.value(u);
            if (p < 0.0 || p.is_nan()) && worst.is_none_or(|(_, w)| p < w) {
                worst = Some((u, p));
            }
        }
    }
    Ok(SignConditionReport {
        passed: worst.is_none(),
        witness: worst.map(|w| w.0),
        witness_product: worst.map(|w| w.1),
        u_max,
        samples: 2 * per_side,
    })
}

/// `F(u) = f(clamp(u, -a, a))`, bounded by `mu`.
#[derive(Debug, Clone)]
pub struct TruncatedNonlinearity {
    base: Nonlinearity,
    a: f64,
    f_at_plus_a: f64,
    f_at_minus_a: f64,
    mu: f64,
}

/// Truncates `f` at its threshold and computes `mu` from
/// [`DEFAULT_SUP_SAMPLES`] samples.
pub fn truncate(f: &Nonlinearity) -> TruncatedNonlinearity {
    let a = f.threshold_a();
    let mut t = TruncatedNonlinearity {
        base: f.clone(),
        a,
        f_at_plus_a: f.value(a),
        f_at_minus_a: f.value(-a),
        mu: 0.0,
    };
    t.mu = t
        .sup_bound(DEFAULT_SUP_SAMPLES)
        .expect("default sample count is above the minimum");
    t
}

impl TruncatedNonlinearity {
    pub fn base(&self) -> &Nonlinearity {
        &self.base
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn f_at_plus_a(&self) -> f64 {
        self.f_at_plus_a
    }

    pub fn f_at_minus_a(&self) -> f64 {
        self.f_at_minus_a
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn evaluate(&self, u: f64) -> Result<f64, NonlinearityError> {
        if !u.is_finite() {
            return Err(NonlinearityError::NonFinite(u));
        }
        Ok(self.value(u))
    }

    /// Sampled `sup |F|`.
    ///
    /// `F` is constant outside `[-a, a]`, so only that interval is searched:
    /// a uniform grid of at least `n_samples` points (grids for larger
    /// counts contain those for smaller ones), both one-sided limits at every
    /// jump, and a golden-section refinement around the largest local maxima.
    pub fn sup_bound(&self, n_samples: usize) -> Result<f64, NonlinearityError> {
        if n_samples < MIN_SUP_SAMPLES {
            return Err(NonlinearityError::TooFewSamples {
                min: MIN_SUP_SAMPLES,
                got: n_samples,
            });
        }
        let a = self.a;
        let abs_f = |u: f64| self.value(u).abs();
        let mut best = abs_f(a).max(abs_f(-a));
        for d in self.base.discontinuities() {
            best = best.max(d.left.abs()).max(d.right.abs());
        }
        if a == 0.0 {
            return Ok(best);
        }

        let mut intervals = MIN_SUP_SAMPLES;
        while intervals < n_samples {
            intervals *= 2;
        }
        let step = 2.0 * a / intervals as f64;
        let samples: Vec<f64> = (0..=intervals)
            .map(|i| abs_f(-a + i as f64 * step))
            .collect();
        best = samples.iter().copied().fold(best, f64::max);

        let mut peaks: Vec<usize> = (0..=intervals)
            .filter(|&i| {
                let left = if i == 0 {
                    f64::NEG_INFINITY
                } else {
                    samples[i - 1]
                };
                let right = samples.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
                samples[i] >= left && samples[i] >= right
            })
            .collect();
        peaks.sort_by(|&i, &j| samples[j].total_cmp(&samples[i]).then(i.cmp(&j)));
        for &i in peaks.iter().take(8) {
            let lo = (-a + (i as f64 - 1.0) * step).max(-a);
            let hi = (-a + (i as f64 + 1.0) * step).min(a);
            best = best.max(golden_max(&abs_f, lo, hi));
        }
        Ok(best)
    }
}

fn golden_max(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    let mut best = g(lo).max(g(hi)).max(g1).max(g2);
    for _ in 0..60 {
        if g1 >= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1);
            best = best.max(g1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2);
            best = best.max(g2);
        }
    }
    best
}

impl ScalarMap for TruncatedNonlinearity {
    fn value(&self, u: f64) -> f64 {
        if u >= self.a {
            self.f_at_plus_a
        } else if u <= -self.a {
            self.f_at_minus_a
        } else {
            self.base.value(u)
        }
    }

    fn derivative(&self, u: f64) -> f64 {
        if u.abs() > self.a {
            0.0
        } else {
            self.base.derivative(u)
        }
    }

    fn has_discontinuities(&self) -> bool {
        self.base.has_discontinuities()
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(self.mu)
    }
}

/// The builtin test corpus.
pub fn builtin_catalog() -> Vec<Nonlinearity> {
    Builtin::ALL
        .into_iter()
        .map(|b| Nonlinearity::from_builtin(b, b.default_threshold()).expect("builtin is valid"))
        .collect()
}
