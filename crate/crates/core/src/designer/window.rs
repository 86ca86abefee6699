//! Per-slice trust window: where the density is large enough, and far
//! enough from its nodes, for the potential formula to be evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowParams {
    /// Density floor: points with `|rho| <= density_floor` are excluded.
    pub density_floor: f64,
    /// Minimum node exclusion radius, in grid cells.
    pub node_margin_cells: f64,
    /// Velocity scale used to widen the exclusion around a moving node:
    /// the radius is at least `sqrt(|c2| / velocity_cap)` where `c2` is the
    /// node's `1/(x - x_n)^2` coefficient of `u`. `inf` keeps the fixed margin.
    pub velocity_cap: f64,
    /// Width (cells) of the fit band outside the margin used for the
    /// finite-part treatment of node singularities.
    pub fit_cells: usize,
    /// Degree of the regular polynomial part of that fit.
    pub fit_degree: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams {
            density_floor: 1e-8,
            node_margin_cells: 2.0,
            velocity_cap: 1.0,
            fit_cells: 16,
            fit_degree: 5,
        }
    }
}

impl WindowParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.density_floor > 0.0
            && self.density_floor < 1.0
            && self.node_margin_cells >= 1.0
            && self.velocity_cap > 0.0
            && self.fit_cells >= 4
            && self.fit_degree <= 8;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad window parameters {self:?}")))
        }
    }
}

/// Cubic through samples at local coordinates -1, 0, 1, 2: value and
/// derivative at `s`.
fn cubic(f: &[f64; 4], s: f64) -> (f64, f64) {
    let nodes = [-1.0, 0.0, 1.0, 2.0];
    let (mut v, mut d) = (0.0, 0.0);
    for i in 0..4 {
        let den: f64 = (0..4).filter(|&m| m != i).map(|m| nodes[i] - nodes[m]).product();
        let others: Vec<f64> = (0..4).filter(|&m| m != i).map(|m| s - nodes[m]).collect();
        let l = others.iter().product::<f64>() / den;
        let dl = (others[1] * others[2] + others[0] * others[2] + others[0] * others[1]) / den;
        v += f[i] * l;
        d += f[i] * dl;
    }
    (v, d)
}

/// Root of the cubic in `[0, 1]` by Newton from the linear estimate,
/// falling back to the estimate if an iterate leaves the cell.
fn cubic_root(f: &[f64; 4], start: f64) -> f64 {
    let mut s = start;
    for _ in 0..20 {
        let (v, d) = cubic(f, s);
        if d == 0.0 {
            return start;
        }
        let next = s - v / d;
        if !(0.0..=1.0).contains(&next) {
            return start;
        }
        if (next - s).abs() < 1e-15 {
            return next;
        }
        s = next;
    }
    s
}

/// A sign change of the amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Node {
    pub x: f64,
    /// `d rho / dx` at the node.
    pub slope: f64,
    /// Flux at the node divided by the squared slope (the `1/y^2`
    /// coefficient of `u` near the node).
    pub pole: f64,
    pub radius: f64,
    /// Whether there is enough resolved density on both sides for the
    /// singular-part fit.
    pub resolved: bool,
}

#[derive(Clone, Debug)]
pub struct TrustWindow {
    threshold: f64,
    mask: Vec<bool>,
    fit_mask: Vec<bool>,
    nearest: Vec<usize>,
    nodes: Vec<Node>,
}

impl TrustWindow {
    /// Build the window from the amplitude and its flux `int 2 rho rho_t`.
    pub(crate) fn from_flux(grid: &Grid, rho: &[f64], flux: &[f64], params: &WindowParams) -> Result<Self> {
        let n = rho.len();
        let dx = grid.dx();
        let eps = params.density_floor;
        let margin = params.node_margin_cells * dx;
        let mut mask: Vec<bool> = rho.iter().map(|r| r.abs() > eps).collect();
        let mut fit_mask = mask.clone();
        let mut nodes = Vec::new();
        for k in 0..n - 1 {
            if !((rho[k] > 0.0 && rho[k + 1] < 0.0) || (rho[k] < 0.0 && rho[k + 1] > 0.0)) {
                continue;
            }
            let resolved = k >= 3 && k + 4 < n && rho[k - 3].abs() > eps && rho[k + 4].abs() > eps;
            if !resolved && (rho[k].abs() <= eps || rho[k + 1].abs() <= eps) {
                // tail noise below the floor, already outside the window
                continue;
            }
            let (w, slope, a) = if resolved {
                let r = [rho[k - 1], rho[k], rho[k + 1], rho[k + 2]];
                let w = cubic_root(&r, -rho[k] / (rho[k + 1] - rho[k]));
                let (_, d) = cubic(&r, w);
                (w, d / dx, cubic(&[flux[k - 1], flux[k], flux[k + 1], flux[k + 2]], w).0)
            } else {
                let w = -rho[k] / (rho[k + 1] - rho[k]);
                (w, (rho[k + 1] - rho[k]) / dx, flux[k] + w * (flux[k + 1] - flux[k]))
            };
            let x = grid.x(k) + w * dx;
            let pole = a / (slope * slope);
            let radius = margin.max((pole.abs() / params.velocity_cap).sqrt());
            for j in 0..n {
                let d = (grid.x(j) - x).abs();
                if d <= radius {
                    mask[j] = false;
                }
                if d <= margin {
                    fit_mask[j] = false;
                }
            }
            nodes.push(Node {
                x,
                slope,
                pole,
                radius,
                resolved,
            });
        }
        let idx: Vec<usize> = (0..n).filter(|&j| mask[j]).collect();
        if idx.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let mut nearest = vec![0; n];
        let mut p = 0;
        for (j, slot) in nearest.iter_mut().enumerate() {
            while p + 1 < idx.len() && idx[p + 1] <= j {
                p += 1;
            }
            let left = idx[p];
            *slot = if left >= j || p + 1 >= idx.len() {
                left
            } else {
                let right = idx[p + 1];
                if right - j < j - left {
                    right
                } else {
                    left
                }
            };
        }
        Ok(TrustWindow {
            threshold: eps,
            mask,
            fit_mask,
            nearest,
            nodes,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn contains(&self, j: usize) -> bool {
        self.mask[j]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Points usable for the node fits (floor plus the fixed margin only).
    pub(crate) fn fit_mask(&self) -> &[bool] {
        &self.fit_mask
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fraction(&self) -> f64 {
        self.len() as f64 / self.mask.len() as f64
    }

    /// Nearest window index to grid index `j`.
    pub fn nearest(&self, j: usize) -> usize {
        self.nearest[j]
    }

    /// Replace values outside the window by the nearest window value.
    pub fn clamp(&self, v: &mut [f64]) {
        let src = v.to_vec();
        for (j, x) in v.iter_mut().enumerate() {
            *x = src[self.nearest[j]];
        }
    }
}
