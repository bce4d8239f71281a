//! Functions sampled on tensor grids: lookup, multilinear interpolation, spacing.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Two coordinates closer than this (relative to the axis extent) name the same node.
const NODE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    axes: Vec<Vec<f64>>,
    /// Row-major, last axis fastest.
    values: Vec<Complex64>,
}

fn dedup_axis(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    let extent = xs.last().copied().unwrap_or(0.0) - xs.first().copied().unwrap_or(0.0);
    let tol = NODE_TOL * extent.abs().max(1.0);
    let mut out: Vec<f64> = Vec::new();
    for x in xs {
        if out.last().map_or(true, |&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

fn locate(axis: &[f64], x: f64) -> usize {
    let extent = axis[axis.len() - 1] - axis[0];
    let tol = NODE_TOL * extent.abs().max(1.0);
    let i = axis.partition_point(|&a| a < x - tol);
    i.min(axis.len() - 1)
}

impl GridField {
    /// Builds the field from `(coordinates, value)` rows in any order. Every grid node must
    /// appear exactly once.
    pub fn from_rows(dim: usize, rows: &[(Vec<f64>, Complex64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("grid needs at least one coordinate column".into()));
        }
        for (n, (x, v)) in rows.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::Input(format!("row {}: expected {dim} coordinates, got {}", n + 1, x.len())));
            }
            if x.iter().any(|c| !c.is_finite()) || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Input(format!("row {}: non-finite entry", n + 1)));
            }
        }
        let axes: Vec<Vec<f64>> = (0..dim).map(|d| dedup_axis(rows.iter().map(|r| r.0[d]).collect())).collect();
        if let Some(d) = axes.iter().position(|a| a.len() < 2) {
            return Err(Error::Input(format!("coordinate column {} takes fewer than two values", d + 1)));
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if rows.len() != total {
            return Err(Error::Input(format!(
                "{} rows do not form a tensor grid of {} nodes ({:?} values per axis)",
                rows.len(),
                total,
                axes.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut values = vec![Complex64::new(0.0, 0.0); total];
        for (n, (x, v)) in rows.iter().enumerate() {
            let mut flat = 0;
            for (d, axis) in axes.iter().enumerate() {
                flat = flat * axis.len() + locate(axis, x[d]);
            }
            if let Some(prev) = seen.insert(flat, n) {
                return Err(Error::Input(format!("rows {} and {} name the same grid node", prev + 1, n + 1)));
            }
            values[flat] = *v;
        }
        Ok(GridField { axes, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a[0], a[a.len() - 1])).collect()
    }

    /// Common node spacing, if every axis is uniform with the same step.
    pub fn uniform_step(&self) -> Option<f64> {
        let h = self.axes[0][1] - self.axes[0][0];
        let ok = self.axes.iter().all(|a| a.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= NODE_TOL * h.abs().max(1.0)));
        ok.then_some(h)
    }

    /// Nodes at least `margin` positions away from every face.
    pub fn interior_nodes(&self, margin: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for axis in &self.axes {
            let inner: Vec<f64> = if axis.len() > 2 * margin { axis[margin..axis.len() - margin].to_vec() } else { Vec::new() };
            out = out.into_iter().flat_map(|p| inner.iter().map(move |&a| [p.clone(), vec![a]].concat())).collect();
        }
        out
    }

    /// Multilinear interpolation; points outside the grid are a domain error.
    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!("expected {} coordinates, got {}", self.dim(), x.len())));
        }
        let mut cells = Vec::with_capacity(self.dim());
        for (axis, &c) in self.axes.iter().zip(x) {
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            let tol = NODE_TOL * (hi - lo).abs().max(1.0);
            if !(c >= lo - tol && c <= hi + tol) {
                return Err(Error::Domain(format!("{c} lies outside the sampled range [{lo}, {hi}]")));
            }
            let i = axis.partition_point(|&a| a <= c).clamp(1, axis.len() - 1) - 1;
            let t = ((c - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
            cells.push((i, t));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for corner in 0..(1usize << self.dim()) {
            let mut w = 1.0;
            let mut flat = 0;
            for (d, &(i, t)) in cells.iter().enumerate() {
                let up = (corner >> d) & 1 == 1;
                w *= if up { t } else { 1.0 - t };
                flat = flat * self.axes[d].len() + i + usize::from(up);
            }
            if w != 0.0 {
                acc += self.values[flat] * w;
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(rows_in_order: bool) -> GridField {
        let mut rows = Vec::new();
        for i in 0..3 {
            for j in 0..4 {
                let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
                rows.push((vec![x, y], Complex64::new(2.0 * x - y, x * y)));
            }
        }
        if !rows_in_order {
            rows.reverse();
        }
        GridField::from_rows(2, &rows).unwrap()
    }

    #[test]
    fn nodes_and_bilinear_values() {
        for ordered in [true, false] {
            let f = plane(ordered);
            assert_eq!(f.eval(&[0.5, 1.0]).unwrap(), Complex64::new(0.0, 0.5));
            let z = f.eval(&[0.25, 0.75]).unwrap();
            assert!((z - Complex64::new(-0.25, 0.1875)).norm() < 1e-15);
            assert_eq!(f.uniform_step(), Some(0.5));
            assert_eq!(f.interior_nodes(1), vec![vec![0.5, 0.5], vec![0.5, 1.0]]);
        }
    }

    #[test]
    fn malformed_grids() {
        let f = plane(true);
        assert!(matches!(f.eval(&[2.0, 0.0]), Err(Error::Domain(_))));
        let rows = vec![(vec![0.0], Complex64::new(1.0, 0.0)), (vec![0.0], Complex64::new(2.0, 0.0))];
        assert!(GridField::from_rows(1, &rows).is_err());
        let rows = vec![
            (vec![0.0, 0.0], Complex64::new(1.0, 0.0)),
            (vec![1.0, 0.0], Complex64::new(1.0, 0.0)),
            (vec![0.0, 1.0], Complex64::new(1.0, 0.0)),
        ];
        assert!(matches!(GridField::from_rows(2, &rows), Err(Error::Input(_))));
    }
}
