//! Finite-part primitive of an integrand with poles at amplitude nodes.
//!
//! Near a node `x_n` the time derivative of the velocity behaves like
//! `c3/y^3 + b/y^2 + c1/y + regular`, `y = x - x_n`. The singular part is
//! fitted by least squares on a band of points just outside the node margin,
//! subtracted before integration and added back through its exact
//! antiderivative `-c3/(2 y^2) - b/y + c1 ln|y|`. Inside the margin the
//! integrand is replaced by the fitted regular part.

use nalgebra::{DMatrix, DVector};

use super::window::{Node, WindowParams};
use crate::grid::{cumulative_from_origin_masked, Grid};

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct PoleFit {
    pub x: f64,
    pub c3: f64,
    pub b: f64,
    pub c1: f64,
    scale: f64,
    poly: Vec<f64>,
}

impl PoleFit {
    pub fn singular(&self, y: f64) -> f64 {
        self.c3 / (y * y * y) + self.b / (y * y) + self.c1 / y
    }

    pub fn antiderivative(&self, y: f64) -> f64 {
        -0.5 * self.c3 / (y * y) - self.b / y + self.c1 * y.abs().ln()
    }

    pub fn regular(&self, y: f64) -> f64 {
        let s = y / self.scale;
        self.poly.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

pub(crate) fn fit_pole(grid: &Grid, f: &[f64], fit_mask: &[bool], x_node: f64, params: &WindowParams) -> Option<PoleFit> {
    let dx = grid.dx();
    let inner = params.node_margin_cells * dx;
    let outer = inner + params.fit_cells as f64 * dx;
    let scale = outer;
    let cols = 3 + params.fit_degree + 1;
    let (k, _) = grid.locate(x_node);
    let reach = (outer / dx).ceil() as usize + 1;
    let lo = k.saturating_sub(reach);
    let hi = (k + reach + 1).min(f.len() - 1);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for j in lo..=hi {
        let y = grid.x(j) - x_node;
        if y.abs() <= inner || y.abs() >= outer || !fit_mask[j] || !f[j].is_finite() {
            continue;
        }
        let s = y / scale;
        let s3 = s * s * s;
        let mut p = 1.0;
        for _ in 0..cols {
            rows.push(p);
            p *= s;
        }
        rhs.push(f[j] * s3);
    }
    let m = rhs.len();
    if m < 2 * cols {
        return None;
    }
    let a = DMatrix::from_row_slice(m, cols, &rows);
    let b = DVector::from_vec(rhs);
    let sol = a.svd(true, true).solve(&b, 1e-13).ok()?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(PoleFit {
        x: x_node,
        c3: sol[0] * scale.powi(3),
        b: sol[1] * scale * scale,
        c1: sol[2] * scale,
        scale,
        poly: sol.iter().skip(3).copied().collect(),
    })
}

/// `int_0^x f` in the finite-part sense. Points outside `fit_mask` that are
/// not inside a node margin contribute zero (they lie outside the window).
pub(crate) fn primitive(grid: &Grid, f: &[f64], fit_mask: &[bool], nodes: &[Node], params: &WindowParams) -> (Vec<f64>, Vec<PoleFit>) {
    let n = f.len();
    let dx = grid.dx();
    let margin = params.node_margin_cells * dx;
    let mut valid: Vec<bool> = (0..n).map(|j| fit_mask[j] && f[j].is_finite()).collect();
    let mut reg: Vec<f64> = (0..n).map(|j| if valid[j] { f[j] } else { 0.0 }).collect();
    let fits: Vec<PoleFit> = nodes
        .iter()
        .filter(|nd| nd.resolved)
        .filter_map(|nd| fit_pole(grid, f, fit_mask, nd.x, params))
        .collect();
    let mut added = vec![0.0; n];
    for fit in &fits {
        for j in 0..n {
            let y = grid.x(j) - fit.x;
            if y.abs() <= margin {
                reg[j] = fit.regular(y);
                valid[j] = true;
            } else {
                reg[j] -= fit.singular(y);
            }
            if y != 0.0 {
                added[j] += fit.antiderivative(y);
            }
        }
    }
    let mut out = cumulative_from_origin_masked(grid, &reg, Some(&valid));
    out.iter_mut().zip(&added).for_each(|(o, a)| *o += a);
    (out, fits)
}
