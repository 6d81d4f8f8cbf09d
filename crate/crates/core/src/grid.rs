//! Axis-aligned box domains and interior grid functions.
//!
//! Only interior nodes are stored. The homogeneous Dirichlet boundary is
//! implicit: every node on the boundary carries the value zero, and the
//! full-grid export emits those zeros explicitly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Uniform tensor grid on `[0, L_0] x ... x [0, L_{d-1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    dim: usize,
    lengths: [f64; MAX_DIM],
    cells: [usize; MAX_DIM],
}

impl BoxDomain {
    pub fn new(lengths: &[f64], cells: &[usize]) -> Result<Self, GridError> {
        let dim = lengths.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(GridError::Dimension(dim));
        }
        if cells.len() != dim {
            return Err(GridError::AxisMismatch {
                lengths: dim,
                cells: cells.len(),
            });
        }
        let mut l = [1.0; MAX_DIM];
        let mut n = [2; MAX_DIM];
        for axis in 0..dim {
            if !(lengths[axis].is_finite() && lengths[axis] > 0.0) {
                return Err(GridError::Length {
                    axis,
                    value: lengths[axis],
                });
            }
            if cells[axis] < 2 {
                return Err(GridError::Cells {
                    axis,
                    value: cells[axis],
                });
            }
            l[axis] = lengths[axis];
            n[axis] = cells[axis];
            if !(l[axis] / n[axis] as f64).is_finite() || l[axis] / n[axis] as f64 <= 0.0 {
                return Err(GridError::Length {
                    axis,
                    value: lengths[axis],
                });
            }
        }
        Ok(Self {
            dim,
            lengths: l,
            cells: n,
        })
    }

    /// Unit box `[0,1]^dim` with `n` cells along every axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self, GridError> {
        Self::new(&vec![1.0; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.cells[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim).map(|a| self.spacing(a)).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    /// Volume of one grid cell, `Π h_i`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Interior nodes along `axis` (`n_i - 1`).
    pub fn interior_len(&self, axis: usize) -> usize {
        self.cells[axis] - 1
    }

    /// Total number of interior nodes `N = Π (n_i - 1)`.
    pub fn interior_count(&self) -> usize {
        (0..self.dim).map(|a| self.interior_len(a)).product()
    }

    /// Flat-index stride of `axis` (axis 0 fastest).
    pub fn stride(&self, axis: usize) -> usize {
        (0..axis).map(|a| self.interior_len(a)).product()
    }

    /// Zero-based interior multi-index of a flat index.
    pub fn multi_index(&self, index: usize) -> Result<[usize; MAX_DIM], GridError> {
        let total = self.interior_count();
        if index >= total {
            return Err(GridError::IndexOutOfRange { index, total });
        }
        let mut rest = index;
        let mut out = [0; MAX_DIM];
        for (axis, slot) in out.iter_mut().enumerate().take(self.dim) {
            let m = self.interior_len(axis);
            *slot = rest % m;
            rest /= m;
        }
        Ok(out)
    }

    pub fn flat_index(&self, multi: &[usize]) -> Result<usize, GridError> {
        let mut index = 0;
        for axis in (0..self.dim).rev() {
            let m = self.interior_len(axis);
            if multi[axis] >= m {
                return Err(GridError::IndexOutOfRange {
                    index: multi[axis],
                    total: m,
                });
            }
            index = index * m + multi[axis];
        }
        Ok(index)
    }

    /// Physical coordinates of an interior node.
    pub fn node_coordinates(&self, index: usize) -> Result<Vec<f64>, GridError> {
        let multi = self.multi_index(index)?;
        Ok((0..self.dim)
            .map(|a| (multi[a] + 1) as f64 * self.spacing(a))
            .collect())
    }

    /// Euclidean distance between two interior nodes.
    pub fn node_distance(&self, i: usize, j: usize) -> Result<f64, GridError> {
        let a = self.multi_index(i)?;
        let b = self.multi_index(j)?;
        Ok((0..self.dim)
            .map(|ax| {
                let d = (a[ax] as f64 - b[ax] as f64) * self.spacing(ax);
                d * d
            })
            .sum::<f64>()
            .sqrt())
    }

    /// Same domain with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self, GridError> {
        let cells: Vec<usize> = self.cells().iter().map(|n| n * factor).collect();
        Self::new(self.lengths(), &cells)
    }
}

/// Values at the interior nodes of a [`BoxDomain`], lexicographic with axis 0
/// fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: BoxDomain,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(domain: &BoxDomain) -> Self {
        Self::constant(domain, 0.0)
    }

    pub fn constant(domain: &BoxDomain, c: f64) -> Self {
        Self {
            domain: *domain,
            values: vec![c; domain.interior_count()],
        }
    }

    pub fn from_values(domain: &BoxDomain, values: Vec<f64>) -> Result<Self, GridError> {
        let expected = domain.interior_count();
        if values.len() != expected {
            return Err(GridError::FieldLength {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            domain: *domain,
            values,
        })
    }

    /// Samples `g` at every interior node.
    pub fn from_fn(domain: &BoxDomain, mut g: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..domain.interior_count())
            .map(|i| {
                let x = domain
                    .node_coordinates(i)
                    .expect("index within interior count");
                g(&x)
            })
            .collect();
        Self {
            domain: *domain,
            values,
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v * v).sum();
        (sum * self.domain.cell_volume()).sqrt()
    }

    pub fn max_value(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
    }

    pub fn min_value(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b <= v => best,
                _ => Some((i, v)),
            })
    }

    /// `max(u_i - shift, 0)` at every node.
    pub fn positive_part(&self, shift: f64) -> Self {
        self.map(|v| (v - shift).max(0.0))
    }

    pub fn negate(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: self.domain,
            values: self.values.iter().map(|&v| g(v)).collect(),
        }
    }

    pub fn check_same_domain(&self, other: &GridField) -> Result<(), GridError> {
        if self.domain != other.domain {
            return Err(GridError::DomainMismatch);
        }
        Ok(())
    }

    /// `sup |self - other|`.
    pub fn sup_distance(&self, other: &GridField) -> Result<f64, GridError> {
        self.check_same_domain(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Value at a full-grid multi-index (boundary nodes included), zero on
    /// the boundary.
    pub fn full_grid_value(&self, full: &[usize]) -> f64 {
        let d = &self.domain;
        let mut interior = [0; MAX_DIM];
        for axis in 0..d.dim() {
            let i = full[axis];
            if i == 0 || i >= d.cells[axis] {
                return 0.0;
            }
            interior[axis] = i - 1;
        }
        let idx = d
            .flat_index(&interior[..d.dim()])
            .expect("interior multi-index");
        self.values[idx]
    }

    /// Writes one row per full-grid node (boundary included) with header
    /// `x[,y[,z]],u`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = &self.domain;
        let names = ["x", "y", "z"];
        let header: Vec<&str> = names[..d.dim()].to_vec();
        writeln!(out, "{},u", header.join(","))?;
        let full: Vec<usize> = (0..d.dim()).map(|a| d.cells[a] + 1).collect();
        let total: usize = full.iter().product();
        let mut multi = [0usize; MAX_DIM];
        for flat in 0..total {
            let mut rest = flat;
            for axis in 0..d.dim() {
                multi[axis] = rest % full[axis];
                rest /= full[axis];
            }
            for axis in 0..d.dim() {
                write!(out, "{},", multi[axis] as f64 * d.spacing(axis))?;
            }
            writeln!(out, "{}", self.full_grid_value(&multi[..d.dim()]))?;
        }
        Ok(())
    }

    /// Restriction to the nodes of a grid coarser by `factor` along every
    /// axis. The coarse nodes are a subset of this grid's nodes.
    pub fn restrict_to(&self, coarse: &BoxDomain, factor: usize) -> Result<GridField, GridError> {
        let d = &self.domain;
        if coarse.dim() != d.dim() || (0..d.dim()).any(|a| coarse.cells[a] * factor != d.cells[a]) {
            return Err(GridError::DomainMismatch);
        }
        let mut values = Vec::with_capacity(coarse.interior_count());
        let mut fine = [0usize; MAX_DIM];
        for i in 0..coarse.interior_count() {
            let m = coarse.multi_index(i)?;
            for axis in 0..d.dim() {
                fine[axis] = (m[axis] + 1) * factor - 1;
            }
            values.push(self.values[d.flat_index(&fine[..d.dim()])?]);
        }
        GridField::from_values(coarse, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize) -> BoxDomain {
        BoxDomain::new(&[1.0], &[n]).unwrap()
    }

    #[test]
    fn node_coordinates_first_interior() {
        assert_eq!(line(4).node_coordinates(0).unwrap(), vec![0.25]);
        let sq = BoxDomain::new(&[1.0, 1.0], &[4, 4]).unwrap();
        assert_eq!(sq.node_coordinates(0).unwrap(), vec![0.25, 0.25]);
        // axis 0 fastest
        assert_eq!(sq.node_coordinates(1).unwrap(), vec![0.5, 0.25]);
        assert_eq!(sq.node_coordinates(3).unwrap(), vec![0.25, 0.5]);
    }

    #[test]
    fn node_coordinates_out_of_range() {
        let err = line(4).node_coordinates(3).unwrap_err();
        assert!(matches!(
            err,
            GridError::IndexOutOfRange { index: 3, total: 3 }
        ));
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(BoxDomain::new(&[], &[]).is_err());
        assert!(BoxDomain::new(&[1.0; 4], &[4; 4]).is_err());
        assert!(BoxDomain::new(&[1.0], &[1]).is_err());
        assert!(BoxDomain::new(&[0.0], &[4]).is_err());
        assert!(BoxDomain::new(&[f64::INFINITY], &[4]).is_err());
        assert!(BoxDomain::new(&[1.0, 1.0], &[4]).is_err());
    }

    #[test]
    fn norms() {
        let d = line(4);
        let z = GridField::zeros(&d);
        assert_eq!(z.sup_norm(), 0.0);
        assert_eq!(z.l2_norm(), 0.0);
        let u = GridField::from_values(&d, vec![1.0, -3.0, 2.0]).unwrap();
        assert_eq!(u.sup_norm(), 3.0);
        assert!((u.l2_norm() - (14.0f64 * 0.25).sqrt()).abs() < 1e-15);
        assert!((u.l2_norm() - 1.8708).abs() < 1e-4);
    }

    #[test]
    fn positive_part_examples() {
        let d = line(4);
        let u = GridField::from_values(&d, vec![0.5, 1.5, 2.0]).unwrap();
        assert_eq!(u.positive_part(1.0).values(), &[0.0, 0.5, 1.0]);
        assert!(u
            .positive_part(u.sup_norm())
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert!(GridField::zeros(&d)
            .positive_part(0.0)
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn csv_includes_boundary_zeros() {
        let d = line(4);
        let u = GridField::from_values(&d, vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,u");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "0,0");
        assert_eq!(lines[5], "1,0");
        assert_eq!(lines[3], "0.5,2");

        let sq = BoxDomain::new(&[1.0, 2.0], &[2, 2]).unwrap();
        let v = GridField::constant(&sq, 7.0);
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,u\n"));
        assert_eq!(text.lines().count(), 10);
        assert_eq!(text.lines().filter(|l| l.ends_with(",7")).count(), 1);
        assert!(text.contains("0.5,1,7"));
    }

    #[test]
    fn restriction_picks_shared_nodes() {
        let fine = line(8);
        let coarse = line(4);
        let u = GridField::from_fn(&fine, |x| x[0]);
        let r = u.restrict_to(&coarse, 2).unwrap();
        assert_eq!(r.values(), &[0.25, 0.5, 0.75]);
    }

    proptest! {
        #[test]
        fn positive_parts_reconstruct(vals in prop::collection::vec(-5.0f64..5.0, 7), a in 0.0f64..3.0) {
            let d = line(8);
            let u = GridField::from_values(&d, vals).unwrap();
            let pos = u.positive_part(a);
            let neg = u.negate().positive_part(a);
            for i in 0..u.len() {
                let rebuilt = u.values()[i].clamp(-a, a) + pos.values()[i] - neg.values()[i];
                prop_assert!((rebuilt - u.values()[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn sup_norm_homogeneous(vals in prop::collection::vec(-5.0f64..5.0, 9), c in -4.0f64..4.0) {
            let d = BoxDomain::new(&[1.0, 2.0], &[4, 4]).unwrap();
            let u = GridField::from_values(&d, vals).unwrap();
            prop_assert!((u.scale(c).sup_norm() - c.abs() * u.sup_norm()).abs() <= 1e-12);
        }

        #[test]
        fn flat_and_multi_index_agree(i in 0usize..(3 * 4 * 5)) {
            let d = BoxDomain::new(&[1.0, 1.0, 1.0], &[4, 5, 6]).unwrap();
            let m = d.multi_index(i).unwrap();
            prop_assert_eq!(d.flat_index(&m[..3]).unwrap(), i);
        }
    }
}
