//! Anderson mixing for the damped fixed-point step.
//!
//! With fixed-point residual `g_k = T(u_k) - u_k` and history differences
//! `ΔU`, `ΔG`, the next iterate is
//!
//! ```text
//! γ       = argmin || g_k - ΔG γ ||₂
//! u_{k+1} = u_k + θ g_k - (ΔU + θ ΔG) γ
//! ```
//!
//! Depth 0 reduces to the plain damped step.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct AndersonMixer {
    depth: usize,
    last: Option<(Vec<f64>, Vec<f64>)>,
    delta_u: VecDeque<Vec<f64>>,
    delta_g: VecDeque<Vec<f64>>,
}

impl AndersonMixer {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            last: None,
            delta_u: VecDeque::with_capacity(depth),
            delta_g: VecDeque::with_capacity(depth),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn history_len(&self) -> usize {
        self.delta_u.len()
    }

    pub fn reset(&mut self) {
        self.last = None;
        self.delta_u.clear();
        self.delta_g.clear();
    }

    /// Next iterate from the current iterate `u` and its residual `g`.
    pub fn step(&mut self, u: &[f64], g: &[f64], theta: f64) -> Vec<f64> {
        let damped: Vec<f64> = u.iter().zip(g).map(|(x, r)| x + theta * r).collect();
        if self.depth == 0 {
            return damped;
        }
        if let Some((u_prev, g_prev)) = self.last.take() {
            if self.delta_u.len() == self.depth {
                self.delta_u.pop_front();
                self.delta_g.pop_front();
            }
            self.delta_u
                .push_back(u.iter().zip(&u_prev).map(|(a, b)| a - b).collect());
            self.delta_g
                .push_back(g.iter().zip(&g_prev).map(|(a, b)| a - b).collect());
        }
        self.last = Some((u.to_vec(), g.to_vec()));
        if self.delta_g.is_empty() {
            return damped;
        }

        let n = g.len();
        let m = self.delta_g.len();
        let dg = DMatrix::from_fn(n, m, |i, j| self.delta_g[j][i]);
        let rhs = DVector::from_column_slice(g);
        let Ok(gamma) = dg.svd(true, true).solve(&rhs, 1e-12) else {
            return damped;
        };
        if gamma.iter().any(|c| !c.is_finite()) {
            return damped;
        }
        let mut next = damped;
        for (j, &c) in gamma.iter().enumerate() {
            for i in 0..n {
                next[i] -= c * (self.delta_u[j][i] + theta * self.delta_g[j][i]);
            }
        }
        next
    }
}
