//! Post-hoc checks of a computed solution against the a priori bounds:
//! the residual of the discrete equation, `sup |u| <= mu / k²`,
//! `|u| <= a` (with an `O(h²)` slack), the energy identity obtained by
//! testing the equation with `(u - a)_+` and `(-u - a)_+`, and the
//! maximum-principle probe at the extreme nodes.
//!
//! Every check carries `pass`, `margin` and `details`; `pass` is always
//! `margin >= 0`.

use serde::{Deserialize, Serialize};

use crate::elliptic::ShiftedLaplacian;
use crate::error::SolveError;
use crate::fixed_point::residual_field;
use crate::grid::{BoxDomain, GridField, MAX_DIM};
use crate::nonlinearity::ScalarMap;

/// Default slack on `sup |u| <= mu/k²`.
pub const DEFAULT_APRIORI_TOL: f64 = 1e-8;
/// Default residual tolerance for certification.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
/// Terms of the energy identity below this count as vanished.
pub const DEFAULT_ENERGY_TOL: f64 = 1e-10;

/// `max(10 max(h_i)², 1e-10)`.
pub fn default_amplitude_tolerance(domain: &BoxDomain) -> f64 {
    let h = domain.max_spacing();
    (10.0 * h * h).max(1e-10)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check<D> {
    pub pass: bool,
    pub margin: f64,
    pub details: D,
}

impl<D> Check<D> {
    fn from_margin(margin: f64, details: D) -> Self {
        Self {
            pass: margin >= 0.0,
            margin,
            details,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualDetails {
    pub residual_sup: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriDetails {
    pub sup_u: f64,
    pub mu: f64,
    pub k: f64,
    /// `mu / k²`.
    pub bound: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeDetails {
    pub sup_u: f64,
    pub a: f64,
    pub tol_amp: f64,
}

/// Discrete terms of the energy identity for one test function.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `Σ_edges D⁺v D⁺w |cell|`.
    pub gradient: f64,
    /// `Σ k² v w |cell|`.
    pub mass: f64,
    /// `Σ ±F(u) w |cell|`.
    pub nonlinearity: f64,
    /// `Σ ±(A u + F(u)) w |cell|`; equals the sum of the three terms.
    pub residual_pairing: f64,
}

impl EnergyTerms {
    pub fn sum(&self) -> f64 {
        self.gradient + self.mass + self.nonlinearity
    }

    pub fn max_abs(&self) -> f64 {
        self.gradient
            .abs()
            .max(self.mass.abs())
            .max(self.nonlinearity.abs())
    }

    pub fn min_term(&self) -> f64 {
        self.gradient.min(self.mass).min(self.nonlinearity)
    }
}

/// Terms for `w = (u - a)_+` (`upper`, with `v = u`) and for
/// `w = (-u - a)_+` (`lower`, with `v = -u` and the nonlinearity negated),
/// so that all six are nonnegative whenever the sign condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyIdentity {
    pub upper: EnergyTerms,
    pub lower: EnergyTerms,
}

impl EnergyIdentity {
    pub fn max_abs(&self) -> f64 {
        self.upper.max_abs().max(self.lower.max_abs())
    }

    pub fn terms(&self) -> [f64; 6] {
        [
            self.upper.gradient,
            self.upper.mass,
            self.upper.nonlinearity,
            self.lower.gradient,
            self.lower.mass,
            self.lower.nonlinearity,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDetails {
    pub terms: EnergyIdentity,
    pub tol: f64,
}

/// Equation terms at an extreme node lying outside `[-a, a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSide {
    pub node: usize,
    pub coordinates: Vec<f64>,
    pub u: f64,
    /// `-Δ_h u` at the node.
    pub neg_laplacian: f64,
    pub mass_term: f64,
    /// Raw `f(u)` at the node.
    pub nonlinearity: f64,
    pub sum: f64,
    /// At the maximum the sum is positive, at the minimum negative: either
    /// contradicts `(-Δ + k²)u + f(u) = 0`.
    pub contradiction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeViolation {
    pub upper: Option<ProbeSide>,
    pub lower: Option<ProbeSide>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDetails {
    pub a: f64,
    pub violation: Option<ProbeViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub residual: Check<ResidualDetails>,
    pub apriori_sup: Check<AprioriDetails>,
    pub amplitude: Check<AmplitudeDetails>,
    pub energy: Check<EnergyDetails>,
    pub max_principle: Check<ProbeDetails>,
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.residual.pass
            && self.apriori_sup.pass
            && self.amplitude.pass
            && self.energy.pass
            && self.max_principle.pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateTolerances {
    pub residual: f64,
    pub apriori: f64,
    /// `None` uses [`default_amplitude_tolerance`].
    pub amplitude: Option<f64>,
    pub energy: f64,
}

impl Default for CertificateTolerances {
    fn default() -> Self {
        Self {
            residual: DEFAULT_RESIDUAL_TOL,
            apriori: DEFAULT_APRIORI_TOL,
            amplitude: None,
            energy: DEFAULT_ENERGY_TOL,
        }
    }
}

pub fn check_residual(
    op: &ShiftedLaplacian,
    map: &(impl ScalarMap + ?Sized),
    u: &GridField,
    tol: f64,
) -> Result<Check<ResidualDetails>, SolveError> {
    let residual_sup = residual_field(op, map, u)?.sup_norm();
    Ok(Check::from_margin(
        tol - residual_sup,
        ResidualDetails { residual_sup, tol },
    ))
}

/// `sup |u| <= mu / k² + tol`.
pub fn check_apriori_sup(u: &GridField, mu: f64, k: f64, tol: f64) -> Check<AprioriDetails> {
    let bound = mu / (k * k);
    let sup_u = u.sup_norm();
    Check::from_margin(
        bound + tol - sup_u,
        AprioriDetails {
            sup_u,
            mu,
            k,
            bound,
            tol,
        },
    )
}

/// `sup |u| <= a + tol_amp`.
pub fn check_amplitude_bound(u: &GridField, a: f64, tol_amp: f64) -> Check<AmplitudeDetails> {
    let sup_u = u.sup_norm();
    Check::from_margin(a + tol_amp - sup_u, AmplitudeDetails { sup_u, a, tol_amp })
}

/// Discrete energy identity with the test functions `(u - a)_+` and
/// `(-u - a)_+`.
///
/// Forward differences run over every grid edge including those touching
/// the boundary, where the values are zero, so summation by parts holds
/// exactly: each side's three terms add up to its residual pairing.
pub fn energy_identity_check(
    op: &ShiftedLaplacian,
    map: &(impl ScalarMap + ?Sized),
    u: &GridField,
    a: f64,
) -> Result<EnergyIdentity, SolveError> {
    let r = residual_field(op, map, u)?;
    let k2 = op.k() * op.k();
    let vol = op.domain().cell_volume();
    let fu: Vec<f64> = u.values().iter().map(|&x| map.value(x)).collect();

    let side = |v: &GridField, sign: f64| -> EnergyTerms {
        let w = v.positive_part(a);
        let gradient = edge_sum(v, &w) * vol;
        let mut mass = 0.0;
        let mut nonlinearity = 0.0;
        let mut residual_pairing = 0.0;
        for i in 0..v.len() {
            let wi = w.values()[i];
            mass += k2 * v.values()[i] * wi;
            nonlinearity += sign * fu[i] * wi;
            residual_pairing += sign * r.values()[i] * wi;
        }
        EnergyTerms {
            gradient,
            mass: mass * vol,
            nonlinearity: nonlinearity * vol,
            residual_pairing: residual_pairing * vol,
        }
    };
    Ok(EnergyIdentity {
        upper: side(u, 1.0),
        lower: side(&u.negate(), -1.0),
    })
}

// Σ over all grid edges of D⁺v · D⁺w, boundary values taken as zero.
fn edge_sum(v: &GridField, w: &GridField) -> f64 {
    let d = v.domain();
    let mut total = 0.0;
    let mut full = [0usize; MAX_DIM];
    for axis in 0..d.dim() {
        let h = d.spacing(axis);
        // lines along `axis`: interior positions in the other axes
        let others: usize = (0..d.dim())
            .filter(|&b| b != axis)
            .map(|b| d.interior_len(b))
            .product();
        for line in 0..others {
            let mut rest = line;
            for b in 0..d.dim() {
                if b != axis {
                    full[b] = rest % d.interior_len(b) + 1;
                    rest /= d.interior_len(b);
                }
            }
            for i in 0..d.cells()[axis] {
                full[axis] = i;
                let v0 = v.full_grid_value(&full[..d.dim()]);
                let w0 = w.full_grid_value(&full[..d.dim()]);
                full[axis] = i + 1;
                let v1 = v.full_grid_value(&full[..d.dim()]);
                let w1 = w.full_grid_value(&full[..d.dim()]);
                total += (v1 - v0) / h * ((w1 - w0) / h);
            }
        }
    }
    total
}

/// At the node where `u` is largest (smallest), if it exceeds `a` (is
/// below `-a`), records `-Δ_h u`, `k² u` and the raw `f(u)`. Returns `None`
/// when `|u| <= a` everywhere.
pub fn maximum_principle_probe(
    op: &ShiftedLaplacian,
    f: &(impl ScalarMap + ?Sized),
    u: &GridField,
    a: f64,
) -> Result<Option<ProbeViolation>, SolveError> {
    let k2 = op.k() * op.k();
    let side = |node: usize, upper: bool| -> Result<ProbeSide, SolveError> {
        let value = u.values()[node];
        let neg_laplacian = op.negative_laplacian_at(u, node)?;
        let mass_term = k2 * value;
        let nonlinearity = f.value(value);
        let sum = neg_laplacian + mass_term + nonlinearity;
        Ok(ProbeSide {
            node,
            coordinates: op.domain().node_coordinates(node)?,
            u: value,
            neg_laplacian,
            mass_term,
            nonlinearity,
            sum,
            contradiction: if upper { sum > 0.0 } else { sum < 0.0 },
        })
    };
    let upper = match u.max_value() {
        Some((node, v)) if v > a => Some(side(node, true)?),
        _ => None,
    };
    let lower = match u.min_value() {
        Some((node, v)) if v < -a => Some(side(node, false)?),
        _ => None,
    };
    Ok((upper.is_some() || lower.is_some()).then_some(ProbeViolation { upper, lower }))
}

/// Runs every certificate on `u`.
///
/// `raw` is the original nonlinearity (used by the probe), `truncated` the
/// bounded map the solver used, `mu` its bound.
pub fn certify(
    op: &ShiftedLaplacian,
    raw: &(impl ScalarMap + ?Sized),
    truncated: &(impl ScalarMap + ?Sized),
    mu: f64,
    a: f64,
    u: &GridField,
    tolerances: &CertificateTolerances,
) -> Result<CertificateReport, SolveError> {
    let residual = check_residual(op, truncated, u, tolerances.residual)?;
    let apriori_sup = check_apriori_sup(u, mu, op.k(), tolerances.apriori);
    let tol_amp = tolerances
        .amplitude
        .unwrap_or_else(|| default_amplitude_tolerance(op.domain()));
    let amplitude = check_amplitude_bound(u, a, tol_amp);
    let terms = energy_identity_check(op, truncated, u, a)?;
    let energy = Check::from_margin(
        tolerances.energy - terms.max_abs(),
        EnergyDetails {
            terms,
            tol: tolerances.energy,
        },
    );
    let violation = maximum_principle_probe(op, raw, u, a)?;
    let max_principle = Check::from_margin(a - u.sup_norm(), ProbeDetails { a, violation });
    Ok(CertificateReport {
        residual,
        apriori_sup,
        amplitude,
        energy,
        max_principle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::assemble;
    use crate::fixed_point::{picard_solve, SolverOptions};
    use crate::nonlinearity::{truncate, Nonlinearity};
    use std::f64::consts::PI;

    fn line(n: usize) -> BoxDomain {
        BoxDomain::new(&[1.0], &[n]).unwrap()
    }

    fn cubic() -> Nonlinearity {
        Nonlinearity::builtin("cubic_shift").unwrap()
    }

    #[test]
    fn residual_examples() {
        let d = line(16);
        let a = assemble(&d, 1.0).unwrap();
        let z = GridField::zeros(&d);
        let sinh = truncate(&Nonlinearity::builtin("sinh").unwrap());
        let c = check_residual(&a, &sinh, &z, 1e-8).unwrap();
        assert!(c.pass);
        assert_eq!(c.details.residual_sup, 0.0);
        let c = check_residual(&a, &truncate(&cubic()), &z, 1e-8).unwrap();
        assert!(!c.pass);
        assert_eq!(c.details.residual_sup, 1.0);
    }

    #[test]
    fn apriori_examples() {
        let d = line(4);
        let z = GridField::zeros(&d);
        let c = check_apriori_sup(&z, 2.0, 1.0, 0.0);
        assert!(c.pass);
        assert_eq!(c.margin, 2.0);
        let bad = GridField::from_values(&d, vec![0.0, 3.0, 0.0]).unwrap();
        assert!(!check_apriori_sup(&bad, 2.0, 1.0, 1e-8).pass);
    }

    #[test]
    fn amplitude_examples() {
        let d = line(4);
        let c = check_amplitude_bound(&GridField::zeros(&d), 0.0, 1e-10);
        assert!(c.pass);
        assert_eq!(c.margin, 1e-10);
        let bad = GridField::from_values(&d, vec![0.0, 1.2, 0.0]).unwrap();
        assert!(!check_amplitude_bound(&bad, 1.0, 1e-3).pass);
        assert_eq!(default_amplitude_tolerance(&line(100)), 10.0 * 0.01 * 0.01);
        assert_eq!(default_amplitude_tolerance(&line(1 << 20)), 1e-10);
    }

    #[test]
    fn energy_terms_vanish_inside_band() {
        let d = line(16);
        let a = assemble(&d, 1.0).unwrap();
        let u = GridField::from_fn(&d, |x| 0.9 * (PI * x[0]).sin());
        let e = energy_identity_check(&a, &truncate(&cubic()), &u, 1.0).unwrap();
        assert!(e.terms().iter().all(|&t| t == 0.0));
    }

    // brute-force sums over the seven nodes plus the two boundary edges
    #[test]
    fn energy_terms_sine_oracle() {
        let n = 8;
        let h = 1.0 / n as f64;
        let d = line(n);
        let a = assemble(&d, 1.0).unwrap();
        let u = GridField::from_fn(&d, |x| 2.0 * (PI * x[0]).sin());
        let big_f = truncate(&cubic());
        let e = energy_identity_check(&a, &big_f, &u, 1.0).unwrap();

        let full: Vec<f64> = (0..=n).map(|i| 2.0 * (PI * i as f64 * h).sin()).collect();
        let full: Vec<f64> = full
            .iter()
            .enumerate()
            .map(|(i, &v)| if i == 0 || i == n { 0.0 } else { v })
            .collect();
        let w: Vec<f64> = full.iter().map(|&v| (v - 1.0f64).max(0.0)).collect();
        let mut grad = 0.0;
        for i in 0..n {
            grad += (full[i + 1] - full[i]) / h * (w[i + 1] - w[i]) / h * h;
        }
        let mass: f64 = (1..n).map(|i| full[i] * w[i] * h).sum();
        let nonl: f64 = (1..n).map(|i| big_f.value(full[i]) * w[i] * h).sum();
        assert!((e.upper.gradient - grad).abs() < 1e-12);
        assert!((e.upper.mass - mass).abs() < 1e-12);
        assert!((e.upper.nonlinearity - nonl).abs() < 1e-12);
        assert!(e.upper.gradient > 0.0 && e.upper.mass > 0.0);
        // F(u) = f(1) = 0 wherever u > 1
        assert_eq!(e.upper.nonlinearity, 0.0);
        assert_eq!(e.lower, EnergyTerms::default());
    }

    #[test]
    fn energy_identity_sums_to_residual_pairing() {
        for d in [
            line(12),
            BoxDomain::new(&[1.0, 2.0], &[6, 9]).unwrap(),
            BoxDomain::unit(3, 5).unwrap(),
        ] {
            let a = assemble(&d, 0.8).unwrap();
            let u = GridField::from_fn(&d, |x| {
                4.0 * x.iter().map(|c| (PI * c).sin()).product::<f64>() - 3.0 * x[0] * (1.0 - x[0])
            });
            let e = energy_identity_check(&a, &truncate(&cubic()), &u, 1.0).unwrap();
            for s in [e.upper, e.lower] {
                assert!((s.sum() - s.residual_pairing).abs() <= 1e-9 * (1.0 + s.sum().abs()));
                assert!(s.min_term() >= -1e-12);
            }
        }
    }

    #[test]
    fn probe_sine_field() {
        let d = line(8);
        let a = assemble(&d, 1.0).unwrap();
        let u = GridField::from_fn(&d, |x| 2.0 * (PI * x[0]).sin());
        let v = maximum_principle_probe(&a, &cubic(), &u, 1.0)
            .unwrap()
            .unwrap();
        let up = v.upper.unwrap();
        assert_eq!(up.node, 3);
        assert_eq!(up.coordinates, vec![0.5]);
        assert!((up.mass_term - 2.0).abs() < 1e-15);
        assert!((up.nonlinearity - 7.0).abs() < 1e-14);
        assert!(up.neg_laplacian >= 0.0);
        assert!(up.contradiction);
        assert!(v.lower.is_none());
    }

    #[test]
    fn probe_constant_field() {
        let d = line(8);
        let a = assemble(&d, 1.0).unwrap();
        let c = 1.5;
        let u = GridField::constant(&d, c);
        let v = maximum_principle_probe(&a, &cubic(), &u, 1.0)
            .unwrap()
            .unwrap();
        let up = v.upper.unwrap();
        // first maximal node touches the boundary: -Δ_h u = c / h²
        assert_eq!(up.node, 0);
        assert!((up.neg_laplacian - c * 64.0).abs() < 1e-12);
        assert!(up.sum > 0.0);

        let lower = maximum_principle_probe(&a, &cubic(), &u.negate(), 1.0)
            .unwrap()
            .unwrap();
        let low = lower.lower.unwrap();
        assert!(low.neg_laplacian < 0.0 && low.sum < 0.0 && low.contradiction);
    }

    #[test]
    fn probe_empty_within_band() {
        let d = line(16);
        let a = assemble(&d, 1.0).unwrap();
        let f = truncate(&cubic());
        let (u, report) = picard_solve(&a, &f, &SolverOptions::default()).unwrap();
        assert!(report.converged());
        assert!(maximum_principle_probe(&a, &cubic(), &u, 1.0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn certify_converged_solution() {
        let d = line(64);
        let a = assemble(&d, 1.0).unwrap();
        let raw = cubic();
        let f = truncate(&raw);
        let (u, _) = picard_solve(&a, &f, &SolverOptions::default()).unwrap();
        let report = certify(
            &a,
            &raw,
            &f,
            f.mu(),
            1.0,
            &u,
            &CertificateTolerances::default(),
        )
        .unwrap();
        assert!(report.all_pass(), "{report:?}");
        assert!(report.apriori_sup.details.sup_u < 0.12);
        for c in [
            report.residual.pass,
            report.apriori_sup.pass,
            report.amplitude.pass,
        ] {
            assert!(c);
        }
        let json = serde_json::to_value(&report).unwrap();
        for key in [
            "residual",
            "apriori_sup",
            "amplitude",
            "energy",
            "max_principle",
        ] {
            let rec = &json[key];
            assert!(
                rec["pass"].is_boolean() && rec["margin"].is_number() && rec["details"].is_object(),
                "{key}"
            );
        }
    }
}
