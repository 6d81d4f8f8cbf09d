//! Discrete Green's kernel columns and their comparison against the
//! free-space screened Coulomb (Yukawa) kernel `e^{-kr} / (4π r)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ShiftedLaplacian;
use crate::error::OperatorError;
use crate::grid::GridField;

/// Free-space Yukawa kernel in three dimensions.
pub fn yukawa(r: f64, k: f64) -> Result<f64, OperatorError> {
    if !(r.is_finite() && r > 0.0) {
        return Err(OperatorError::Singular(r));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(OperatorError::NonPositiveK(k));
    }
    Ok((-k * r).exp() / (4.0 * PI * r))
}

/// Composite Simpson rule on `[0, R]` where `R` is the smallest doubling of
/// `1/k` whose analytic tail is below `tail_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub tail_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panels: 4096,
            tail_tol: 1e-8,
        }
    }
}

/// `∫_{R³} yukawa(|y|, k) dy` reduced to the radial integral
/// `∫_0^∞ 4π r² yukawa(r, k) dr`, whose exact value is `1/k²`.
pub fn yukawa_mass(k: f64, quad: QuadratureSpec) -> Result<f64, OperatorError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(OperatorError::NonPositiveK(k));
    }
    if quad.panels < 2 || !(quad.tail_tol > 0.0) {
        return Err(OperatorError::Parameter(format!(
            "quadrature needs at least 2 panels and a positive tail tolerance (got {:?})",
            quad
        )));
    }
    // ∫_R^∞ r e^{-kr} dr = e^{-kR} (R/k + 1/k²)
    let tail = |r: f64| (-k * r).exp() * (r / k + 1.0 / (k * k));
    let mut radius = 1.0 / k;
    while tail(radius) >= quad.tail_tol {
        radius *= 2.0;
    }
    let integrand = |r: f64| -> Result<f64, OperatorError> {
        if r == 0.0 {
            Ok(0.0)
        } else {
            Ok(4.0 * PI * r * r * yukawa(r, k)?)
        }
    };
    let panels = quad.panels + quad.panels % 2;
    let h = radius / panels as f64;
    let mut sum = integrand(0.0)? + integrand(radius)?;
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(i as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

/// Discrete `G(·, y)`: solves `A g = e_y / Π h_i` so that `g` approximates
/// the continuum kernel.
pub fn green_kernel_column(
    op: &ShiftedLaplacian,
    source_index: usize,
) -> Result<GridField, OperatorError> {
    let d = op.domain();
    let total = d.interior_count();
    if source_index >= total {
        return Err(crate::error::GridError::IndexOutOfRange {
            index: source_index,
            total,
        }
        .into());
    }
    let mut b = vec![0.0; total];
    b[source_index] = 1.0 / d.cell_volume();
    op.green_apply(&GridField::from_values(d, b)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub source_index: usize,
    pub source: Vec<f64>,
    pub pass: bool,
    pub slack: f64,
    /// Nodes closer than this to the source are not compared.
    pub exclusion_radius: f64,
    pub nodes_checked: usize,
    /// Largest `G_h(x, y) / yukawa(|x - y|, k)` over checked nodes.
    pub worst_ratio: f64,
    pub worst_node: Option<usize>,
    pub min_value: f64,
    pub nonnegative: bool,
}

/// Checks `0 <= G_h(x, y) <= yukawa(|x - y|, k) (1 + slack)` at every node
/// with `|x - y| >= 2 max h_i`.
pub fn verify_kernel_bound(
    op: &ShiftedLaplacian,
    source_index: usize,
    slack: f64,
) -> Result<KernelBoundReport, OperatorError> {
    let d = op.domain();
    if d.dim() != 3 {
        return Err(OperatorError::Unsupported(d.dim()));
    }
    if !(slack.is_finite() && slack >= 0.0) {
        return Err(OperatorError::Parameter(format!(
            "slack must be nonnegative (got {slack})"
        )));
    }
    let column = green_kernel_column(op, source_index)?;
    let exclusion = 2.0 * d.max_spacing();
    let scale = column.sup_norm();
    let min_value = column
        .values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let nonnegative = min_value >= -1e-12 * scale;

    let mut worst_ratio = 0.0f64;
    let mut worst_node = None;
    let mut checked = 0;
    for (x, &g) in column.values().iter().enumerate() {
        let r = d.node_distance(x, source_index)?;
        // guard against the rounding of e.g. sqrt(4h²) just below 2h
        if r < exclusion * (1.0 - 1e-12) {
            continue;
        }
        checked += 1;
        let ratio = g / yukawa(r, op.k())?;
        if worst_node.is_none() || ratio > worst_ratio {
            worst_ratio = ratio;
            worst_node = Some(x);
        }
    }
    Ok(KernelBoundReport {
        source_index,
        source: d.node_coordinates(source_index)?,
        pass: nonnegative && worst_ratio <= 1.0 + slack,
        slack,
        exclusion_radius: exclusion,
        nodes_checked: checked,
        worst_ratio,
        worst_node,
        min_value,
        nonnegative,
    })
}
