//! The discrete shifted Laplacian `A = -Δ_h + k² I` with homogeneous Dirichlet
//! rows eliminated, and its inverse, the discrete Green operator.
//!
//! Sign convention: `A G = δ` with `G >= 0`, so the fixed-point map is
//! `T(u) = -A⁻¹ F(u)`. `A` is a symmetric, strictly diagonally dominant
//! M-matrix, which makes `A⁻¹` entrywise nonnegative.

mod kernel;
mod solver;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::OperatorError;
use crate::grid::{BoxDomain, GridField, MAX_DIM};

pub use kernel::{
    green_kernel_column, verify_kernel_bound, yukawa, yukawa_mass, KernelBoundReport,
    QuadratureSpec,
};
pub use solver::{conjugate_gradient, BandedCholesky, CgStats};

/// Relative residual target of every Green solve.
pub const GREEN_REL_TOL: f64 = 1e-12;

// Direct factorization is used by `LinearSolver::Auto` for at most
// `DIRECT_MAX_UNKNOWNS` nodes, and only while the band work and storage stay
// below these limits.
const DIRECT_MAX_UNKNOWNS: usize = 100_000;
const DIRECT_MAX_FLOPS: f64 = 2e8;
const DIRECT_MAX_STORAGE: f64 = 2e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Banded Cholesky on small systems, conjugate gradients otherwise.
    #[default]
    Auto,
    ConjugateGradient,
    Direct,
}

#[derive(Debug, Clone)]
pub struct ShiftedLaplacian {
    domain: BoxDomain,
    k: f64,
    coupling: [f64; MAX_DIM],
    diagonal: f64,
    solver: LinearSolver,
    factor: OnceLock<Result<BandedCholesky, OperatorError>>,
}

/// Builds the 5/7-point (3-point in 1D) stencil operator on `domain`.
pub fn assemble(domain: &BoxDomain, k: f64) -> Result<ShiftedLaplacian, OperatorError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(OperatorError::NonPositiveK(k));
    }
    let mut coupling = [0.0; MAX_DIM];
    for (axis, c) in coupling.iter_mut().enumerate().take(domain.dim()) {
        let h = domain.spacing(axis);
        *c = 1.0 / (h * h);
    }
    let diagonal = 2.0 * coupling.iter().sum::<f64>() + k * k;
    Ok(ShiftedLaplacian {
        domain: *domain,
        k,
        coupling,
        diagonal,
        solver: LinearSolver::Auto,
        factor: OnceLock::new(),
    })
}

impl ShiftedLaplacian {
    pub fn with_solver(mut self, solver: LinearSolver) -> Self {
        self.solver = solver;
        self.factor = OnceLock::new();
        self
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    /// Off-diagonal entry coupling neighbours along `axis`, `-1/h²`.
    pub fn off_diagonal(&self, axis: usize) -> f64 {
        -self.coupling[axis]
    }

    pub fn len(&self) -> usize {
        self.domain.interior_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Half-bandwidth in the lexicographic ordering.
    pub fn bandwidth(&self) -> usize {
        let d = &self.domain;
        if d.dim() == 1 {
            1
        } else {
            d.stride(d.dim() - 1)
        }
    }

    /// Solver actually used for Green solves.
    pub fn resolved_solver(&self) -> LinearSolver {
        match self.solver {
            LinearSolver::Auto => {
                let n = self.len() as f64;
                let bw = self.bandwidth() as f64;
                if self.len() <= DIRECT_MAX_UNKNOWNS
                    && n * bw * bw <= DIRECT_MAX_FLOPS
                    && n * (bw + 1.0) <= DIRECT_MAX_STORAGE
                {
                    LinearSolver::Direct
                } else {
                    LinearSolver::ConjugateGradient
                }
            }
            s => s,
        }
    }

    /// Matrix entry `A[i, j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal;
        }
        let (hi, lo) = if i > j { (i, j) } else { (j, i) };
        let delta = hi - lo;
        let Ok(m) = self.domain.multi_index(hi) else {
            return 0.0;
        };
        for axis in 0..self.domain.dim() {
            if delta == self.domain.stride(axis) && m[axis] > 0 {
                return -self.coupling[axis];
            }
        }
        0.0
    }

    /// `y = (A + diag(shift)) x`; `shift` may be empty.
    pub fn apply_slice_shifted(&self, x: &[f64], shift: &[f64], y: &mut [f64]) {
        let d = &self.domain;
        let mut m = [1usize; MAX_DIM];
        for (axis, slot) in m.iter_mut().enumerate().take(d.dim()) {
            *slot = d.interior_len(axis);
        }
        let s1 = m[0];
        let s2 = m[0] * m[1];
        let [c0, c1, c2] = self.coupling;
        let mut idx = 0;
        for i2 in 0..m[2] {
            for i1 in 0..m[1] {
                for i0 in 0..m[0] {
                    let mut v = self.diagonal * x[idx];
                    if i0 > 0 {
                        v -= c0 * x[idx - 1];
                    }
                    if i0 + 1 < m[0] {
                        v -= c0 * x[idx + 1];
                    }
                    if i1 > 0 {
                        v -= c1 * x[idx - s1];
                    }
                    if i1 + 1 < m[1] {
                        v -= c1 * x[idx + s1];
                    }
                    if i2 > 0 {
                        v -= c2 * x[idx - s2];
                    }
                    if i2 + 1 < m[2] {
                        v -= c2 * x[idx + s2];
                    }
                    if !shift.is_empty() {
                        v += shift[idx] * x[idx];
                    }
                    y[idx] = v;
                    idx += 1;
                }
            }
        }
    }

    pub fn apply_slice(&self, x: &[f64], y: &mut [f64]) {
        self.apply_slice_shifted(x, &[], y);
    }

    /// `A u`.
    pub fn apply(&self, u: &GridField) -> Result<GridField, OperatorError> {
        self.check_domain(u)?;
        let mut out = vec![0.0; self.len()];
        self.apply_slice(u.values(), &mut out);
        Ok(GridField::from_values(&self.domain, out)?)
    }

    /// `-Δ_h u` alone (the `k²` shift removed), at one node.
    pub fn negative_laplacian_at(&self, u: &GridField, index: usize) -> Result<f64, OperatorError> {
        self.check_domain(u)?;
        let m = self.domain.multi_index(index)?;
        let x = u.values();
        let mut v = (self.diagonal - self.k * self.k) * x[index];
        for axis in 0..self.domain.dim() {
            let s = self.domain.stride(axis);
            let c = self.coupling[axis];
            if m[axis] > 0 {
                v -= c * x[index - s];
            }
            if m[axis] + 1 < self.domain.interior_len(axis) {
                v -= c * x[index + s];
            }
        }
        Ok(v)
    }

    /// Solves `A w = b`, the discrete Green operator applied to `b`.
    pub fn green_apply(&self, b: &GridField) -> Result<GridField, OperatorError> {
        self.check_domain(b)?;
        let w = self.solve_slice(b.values())?;
        Ok(GridField::from_values(&self.domain, w)?)
    }

    pub fn solve_slice(&self, b: &[f64]) -> Result<Vec<f64>, OperatorError> {
        match self.resolved_solver() {
            LinearSolver::Direct => {
                let chol = self
                    .factor
                    .get_or_init(|| self.factor_shifted(&[]))
                    .as_ref()
                    .map_err(Clone::clone)?;
                Ok(self.refine(chol, b, &[]))
            }
            _ => self.cg(b, &[]),
        }
    }

    /// Solves `(A + diag(shift)) w = b`. Used for Newton Jacobians.
    pub fn solve_shifted(&self, b: &[f64], shift: &[f64]) -> Result<Vec<f64>, OperatorError> {
        match self.resolved_solver() {
            LinearSolver::Direct => {
                let chol = self.factor_shifted(shift)?;
                Ok(self.refine(&chol, b, shift))
            }
            _ => self.cg(b, shift),
        }
    }

    fn factor_shifted(&self, shift: &[f64]) -> Result<BandedCholesky, OperatorError> {
        BandedCholesky::factor(self.len(), self.bandwidth(), |i, j| {
            let mut v = self.entry(i, j);
            if i == j && !shift.is_empty() {
                v += shift[i];
            }
            v
        })
    }

    // one step of iterative refinement on top of the direct solve
    fn refine(&self, chol: &BandedCholesky, b: &[f64], shift: &[f64]) -> Vec<f64> {
        let mut x = chol.solve(b);
        let mut ax = vec![0.0; x.len()];
        self.apply_slice_shifted(&x, shift, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = chol.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        x
    }

    fn cg(&self, b: &[f64], shift: &[f64]) -> Result<Vec<f64>, OperatorError> {
        let diag: Vec<f64> = if shift.is_empty() {
            vec![self.diagonal; b.len()]
        } else {
            shift.iter().map(|s| self.diagonal + s).collect()
        };
        let max_iter = 10 * b.len() + 100;
        let (x, _) = conjugate_gradient(
            |x, y| self.apply_slice_shifted(x, shift, y),
            &diag,
            b,
            GREEN_REL_TOL,
            max_iter,
        )?;
        Ok(x)
    }

    /// `||A w - b||_2 / ||b||_2`.
    pub fn relative_residual(&self, w: &GridField, b: &GridField) -> Result<f64, OperatorError> {
        let aw = self.apply(w)?;
        let num: f64 = aw
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let den: f64 = b.values().iter().map(|y| y * y).sum();
        Ok(if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        })
    }

    fn check_domain(&self, u: &GridField) -> Result<(), OperatorError> {
        if u.domain() != &self.domain {
            return Err(crate::error::GridError::DomainMismatch.into());
        }
        Ok(())
    }
}
