//! Linear solvers for the SPD stencil systems.
//!
//! Both solvers traverse memory in a fixed order, so results are bitwise
//! reproducible for a given input.

use crate::error::OperatorError;

/// Outcome of a successful iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients on `op(x) = b`.
///
/// `op` writes the operator applied to its first argument into the second.
/// Stops once `||r||_2 <= rel_tol * ||b||_2`.
pub fn conjugate_gradient(
    op: impl Fn(&[f64], &mut [f64]),
    diagonal: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats), OperatorError> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diagonal).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;

    for iter in 1..=max_iter {
        op(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(OperatorError::Breakdown {
                iterations: iter,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= rel_tol {
            return Ok((
                x,
                CgStats {
                    iterations: iter,
                    relative_residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] / diagonal[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(OperatorError::Breakdown {
        iterations: max_iter,
        residual: rel,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor of a symmetric banded matrix, stored by rows as the
/// `bandwidth + 1` entries left of and including the diagonal.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    lower: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix whose lower band is produced by `entry(i, j)` for
    /// `i - bandwidth <= j <= i`.
    pub fn factor(
        n: usize,
        bandwidth: usize,
        entry: impl Fn(usize, usize) -> f64,
    ) -> Result<Self, OperatorError> {
        let w = bandwidth + 1;
        let mut lower = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bandwidth);
            for j in j0..=i {
                lower[i * w + (j + bandwidth - i)] = entry(i, j);
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bandwidth);
            for j in j0..=i {
                let mut s = lower[i * w + (j + bandwidth - i)];
                let k0 = j0.max(j.saturating_sub(bandwidth));
                for k in k0..j {
                    s -= lower[i * w + (k + bandwidth - i)] * lower[j * w + (k + bandwidth - j)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(OperatorError::Parameter(format!(
                            "matrix is not positive definite (pivot {s:e} at row {i})"
                        )));
                    }
                    lower[i * w + bandwidth] = s.sqrt();
                } else {
                    lower[i * w + (j + bandwidth - i)] = s / lower[j * w + bandwidth];
                }
            }
        }
        Ok(Self {
            n,
            bandwidth,
            lower,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bandwidth, self.bandwidth + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.lower[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.lower[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.lower[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.lower[i * w + bw];
        }
        y
    }
}
