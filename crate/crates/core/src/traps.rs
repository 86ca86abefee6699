//! Trap potentials and their stationary states.

use std::f64::consts::PI;

use crate::eigen::{self, Stencil};
use crate::error::{Error, Result};
use crate::grid::{second_derivative, DerivativeMethod, Grid, RealField};

pub const MAX_HERMITE_INDEX: usize = 20;
/// Relative edge amplitude above which a state is flagged as leaking.
pub const EDGE_TOLERANCE: f64 = 1e-8;
/// Relative amplitude below which samples are ignored when counting nodes.
pub const NODE_FLOOR: f64 = 1e-4;
/// Overlap of adjacent lattice sites above which a warning is attached.
pub const LATTICE_OVERLAP_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum TrapPotential {
    Harmonic { omega: f64 },
    /// `k |x|`.
    Linear { slope: f64 },
    /// The potential whose zero-node state at energy `omega_site / 2` is the
    /// weighted sum of site ground states.
    Lattice {
        centers: Vec<f64>,
        omega_site: f64,
        weights: Vec<f64>,
    },
    Tabulated(RealField),
}

impl TrapPotential {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            TrapPotential::Harmonic { omega } if !(*omega > 0.0 && omega.is_finite()) => {
                bad(format!("harmonic trap needs omega > 0, got {omega}"))
            }
            TrapPotential::Linear { slope } if !(*slope > 0.0 && slope.is_finite()) => {
                bad(format!("linear trap needs slope > 0, got {slope}"))
            }
            TrapPotential::Lattice {
                centers,
                omega_site,
                weights,
            } => {
                if centers.is_empty() || centers.len() != weights.len() {
                    return bad("lattice needs one weight per center".into());
                }
                if !(*omega_site > 0.0 && omega_site.is_finite()) {
                    return bad(format!("lattice needs omega_site > 0, got {omega_site}"));
                }
                if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return bad("lattice weights must be positive".into());
                }
                if centers.windows(2).any(|c| !(c[1] > c[0])) || centers.iter().any(|c| !c.is_finite()) {
                    return bad("lattice centers must be finite and strictly increasing".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Value at a point. Tabulated traps are linearly interpolated.
    pub fn value_at(&self, x: f64) -> f64 {
        match self {
            TrapPotential::Harmonic { omega } => 0.5 * omega * omega * x * x,
            TrapPotential::Linear { slope } => slope * x.abs(),
            TrapPotential::Lattice {
                centers,
                omega_site,
                weights,
            } => {
                // Boltzmann-like average of the site parabolas, computed in
                // log space so the far tails stay finite.
                let om = *omega_site;
                let logs: Vec<f64> = centers
                    .iter()
                    .zip(weights)
                    .map(|(c, w)| w.ln() - 0.5 * om * (x - c) * (x - c))
                    .collect();
                let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let (mut num, mut den) = (0.0, 0.0);
                for (l, c) in logs.iter().zip(centers) {
                    let p = (l - top).exp();
                    num += p * 0.5 * om * om * (x - c) * (x - c);
                    den += p;
                }
                num / den
            }
            TrapPotential::Tabulated(f) => f.sample(x),
        }
    }

    pub fn evaluate(&self, grid: &Grid) -> Result<RealField> {
        self.validate()?;
        if let TrapPotential::Tabulated(f) = self {
            if f.grid() != grid {
                return Err(Error::GridMismatch);
            }
            return Ok(f.clone());
        }
        RealField::new(*grid, grid.points().into_iter().map(|x| self.value_at(x)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateOrigin {
    Analytic,
    Numerical(Stencil),
    Lattice,
}

/// A real stationary state with its curvature `psi''` precomputed.
#[derive(Clone, Debug)]
pub struct Eigenstate {
    wave: RealField,
    second_derivative: RealField,
    energy: f64,
    quantum_number: usize,
    trap: TrapPotential,
    origin: StateOrigin,
    edge_leakage: Option<f64>,
}

impl Eigenstate {
    pub fn wave(&self) -> &RealField {
        &self.wave
    }

    pub fn grid(&self) -> &Grid {
        self.wave.grid()
    }

    /// `psi''` from the stationary identity `psi'' = 2 (U - E) psi`
    /// (analytic Gaussian curvature for lattice targets).
    pub fn second_derivative(&self) -> &RealField {
        &self.second_derivative
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn quantum_number(&self) -> usize {
        self.quantum_number
    }

    pub fn trap(&self) -> &TrapPotential {
        &self.trap
    }

    pub fn origin(&self) -> StateOrigin {
        self.origin
    }

    /// Edge amplitude relative to the peak, when above [`EDGE_TOLERANCE`].
    pub fn edge_leakage(&self) -> Option<f64> {
        self.edge_leakage
    }

    /// Sign changes among samples above [`NODE_FLOOR`] of the peak. Small
    /// samples never hide a resolved node; the floor only drops stencil
    /// ripple in classically forbidden regions.
    pub fn node_count(&self) -> usize {
        self.wave.sign_changes(NODE_FLOOR * self.wave.max_abs())
    }

    /// `||(-1/2 d^2 + U - E) psi|| / ||psi||` over the interior, with the
    /// operator the state was computed with. Closed-form states use the
    /// spectral operator on power-of-two grids and the 5-point stencil
    /// otherwise.
    pub fn residual(&self) -> Result<f64> {
        let grid = *self.grid();
        let u = self.trap.evaluate(&grid)?;
        let psi = self.wave.values();
        let h = match self.origin {
            StateOrigin::Numerical(st) => eigen::apply(u.values(), grid.dx(), st, psi),
            _ => {
                let method = if grid.is_power_of_two() {
                    DerivativeMethod::Spectral
                } else {
                    DerivativeMethod::FiniteDifference
                };
                let d2 = second_derivative(&self.wave, method)?.field;
                (0..psi.len()).map(|j| -0.5 * d2.values()[j] + u.values()[j] * psi[j]).collect()
            }
        };
        let n = psi.len();
        let r: f64 = (2..n - 2).map(|j| (h[j] - self.energy * psi[j]).powi(2)).sum();
        let p: f64 = (2..n - 2).map(|j| psi[j] * psi[j]).sum();
        Ok((r / p).sqrt())
    }
}

fn edge_leakage(v: &[f64]) -> Option<f64> {
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n = v.len();
    let edge = v[0].abs().max(v[1].abs()).max(v[n - 1].abs()).max(v[n - 2].abs());
    let rel = edge / peak;
    (rel > EDGE_TOLERANCE).then_some(rel)
}

/// Harmonic-oscillator eigenstate `n` of frequency `omega`, normalized in
/// closed form and positive for large positive `x`.
pub fn harmonic_eigenstate(omega: f64, n: usize, grid: &Grid) -> Result<Eigenstate> {
    let trap = TrapPotential::Harmonic { omega };
    trap.validate()?;
    if n > MAX_HERMITE_INDEX {
        return Err(Error::InvalidArgument(format!(
            "analytic Hermite states limited to n <= {MAX_HERMITE_INDEX}; use solve_stationary"
        )));
    }
    let values: Vec<f64> = grid.points().iter().map(|&x| hermite_function(n, omega, x)).collect();
    let energy = omega * (n as f64 + 0.5);
    let curv = grid
        .points()
        .iter()
        .zip(&values)
        .map(|(&x, &v)| 2.0 * (0.5 * omega * omega * x * x - energy) * v)
        .collect();
    Ok(Eigenstate {
        edge_leakage: edge_leakage(&values),
        wave: RealField::new(*grid, values)?,
        second_derivative: RealField::new(*grid, curv)?,
        energy,
        quantum_number: n,
        trap,
        origin: StateOrigin::Analytic,
    })
}

/// Normalized Hermite function by the stable three-term recursion.
pub fn hermite_function(n: usize, omega: f64, x: f64) -> f64 {
    let xi = omega.sqrt() * x;
    let mut prev = 0.0;
    let mut cur = (omega / PI).powf(0.25) * (-0.5 * xi * xi).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * xi * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Lowest `n_states` stationary states of `trap` on `grid` (default 5-point
/// polish, see [`solve_stationary_with`]).
pub fn solve_stationary(trap: &TrapPotential, n_states: usize, grid: &Grid) -> Result<Vec<Eigenstate>> {
    solve_stationary_with(trap, n_states, grid, Stencil::FivePoint)
}

/// Eigenstates with Dirichlet edges. `Stencil::ThreePoint` returns the pure
/// tridiagonal discretization; `FivePoint` polishes each pair on the 5-point
/// operator. States are normalized with the trapezoid rule and signed positive
/// at their rightmost antinode. Edge leakage is reported per state.
pub fn solve_stationary_with(
    trap: &TrapPotential,
    n_states: usize,
    grid: &Grid,
    stencil: Stencil,
) -> Result<Vec<Eigenstate>> {
    if n_states == 0 {
        return Err(Error::InvalidArgument("need at least one state".into()));
    }
    let u = trap.evaluate(grid)?;
    let pairs = eigen::lowest(u.values(), grid.dx(), n_states, stencil)?;
    let mut out = Vec::with_capacity(n_states);
    for (n, pair) in pairs.into_iter().enumerate() {
        let mut v = pair.vector;
        let f = RealField::from_raw(*grid, v.clone());
        let norm = f.norm();
        v.iter_mut().for_each(|x| *x /= norm);
        if rightmost_antinode(&v) < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let curv = v
            .iter()
            .zip(u.values())
            .map(|(p, uu)| 2.0 * (uu - pair.energy) * p)
            .collect();
        let state = Eigenstate {
            edge_leakage: edge_leakage(&v),
            wave: RealField::new(*grid, v)?,
            second_derivative: RealField::new(*grid, curv)?,
            energy: pair.energy,
            quantum_number: n,
            trap: trap.clone(),
            origin: StateOrigin::Numerical(stencil),
        };
        if state.node_count() != n {
            return Err(Error::Eigensolver(format!(
                "state {n} has {} nodes",
                state.node_count()
            )));
        }
        out.push(state);
    }
    Ok(out)
}

fn rightmost_antinode(v: &[f64]) -> f64 {
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for j in (1..v.len() - 1).rev() {
        let a = v[j].abs();
        if a >= 1e-3 * peak && a >= v[j - 1].abs() && a >= v[j + 1].abs() {
            return v[j];
        }
    }
    v.iter().cloned().fold(0.0, |m, x| if x.abs() > m.abs() { x } else { m })
}

/// A normalized equal-phase sum of site ground states.
#[derive(Clone, Debug)]
pub struct LatticeTarget {
    pub state: Eigenstate,
    /// Largest overlap of adjacent (unnormalized) site Gaussians.
    pub max_adjacent_overlap: f64,
    /// Set when the sites overlap beyond [`LATTICE_OVERLAP_TOLERANCE`].
    pub overlap_warning: bool,
}

/// `sum_j w_j psi_0^{omega_site}(x - c_j)`, normalized on the grid, with
/// nominal energy `omega_site / 2`.
pub fn lattice_target(centers: &[f64], omega_site: f64, weights: &[f64], grid: &Grid) -> Result<LatticeTarget> {
    let trap = TrapPotential::Lattice {
        centers: centers.to_vec(),
        omega_site,
        weights: weights.to_vec(),
    };
    trap.validate()?;
    let om = omega_site;
    let pts = grid.points();
    let mut psi = vec![0.0; pts.len()];
    let mut curv = vec![0.0; pts.len()];
    for (c, w) in centers.iter().zip(weights) {
        for (j, &x) in pts.iter().enumerate() {
            let g = w * hermite_function(0, om, x - c);
            psi[j] += g;
            curv[j] += (om * om * (x - c) * (x - c) - om) * g;
        }
    }
    let norm = RealField::from_raw(*grid, psi.clone()).norm();
    psi.iter_mut().for_each(|v| *v /= norm);
    curv.iter_mut().for_each(|v| *v /= norm);
    let max_adjacent_overlap = centers
        .windows(2)
        .map(|c| (-0.25 * om * (c[1] - c[0]).powi(2)).exp())
        .fold(0.0, f64::max);
    Ok(LatticeTarget {
        state: Eigenstate {
            edge_leakage: edge_leakage(&psi),
            wave: RealField::new(*grid, psi)?,
            second_derivative: RealField::new(*grid, curv)?,
            energy: 0.5 * om,
            quantum_number: 0,
            trap,
            origin: StateOrigin::Lattice,
        },
        max_adjacent_overlap,
        overlap_warning: max_adjacent_overlap > LATTICE_OVERLAP_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(-12.0, 12.0, 1024).unwrap()
    }

    #[test]
    fn harmonic_closed_forms() {
        let g = Grid::new(-12.0, 12.0, 1025).unwrap();
        let s0 = harmonic_eigenstate(1.0, 0, &g).unwrap();
        assert!((s0.wave().sample(0.0) - 0.751126).abs() < 1e-6);
        assert_eq!(s0.energy(), 0.5);
        let s1 = harmonic_eigenstate(1.0, 1, &g).unwrap();
        assert!(s1.wave().sample(0.0).abs() < 1e-15);
        assert_eq!(s1.energy(), 1.5);
        assert_eq!(s1.node_count(), 1);
        let s = harmonic_eigenstate(1.0 / 3.0, 0, &g).unwrap();
        assert!((s.wave().sample(0.0) - 3f64.powf(-0.25) * PI.powf(-0.25)).abs() < 1e-15);
        assert!((s.wave().sample(0.0) - 0.570732).abs() < 1e-6);
        assert!((s.energy() - 1.0 / 6.0).abs() < 1e-15);
        assert!(harmonic_eigenstate(1.0, 21, &g).is_err());
        assert!(harmonic_eigenstate(-1.0, 0, &g).is_err());
    }

    #[test]
    fn analytic_states_satisfy_invariants() {
        let g = grid();
        for n in 0..6 {
            let s = harmonic_eigenstate(1.0, n, &g).unwrap();
            assert!((s.wave().norm() - 1.0).abs() < 1e-10);
            assert_eq!(s.node_count(), n);
            assert!(s.residual().unwrap() < 1e-6, "{n}: {}", s.residual().unwrap());
            assert!(*s.wave().values().last().unwrap() >= 0.0);
            assert!(s.edge_leakage().is_none());
        }
    }

    #[test]
    fn eigensolver_harmonic_spectrum() {
        let g = Grid::new(-12.0, 12.0, 2048).unwrap();
        let states = solve_stationary(&TrapPotential::Harmonic { omega: 1.0 }, 6, &g).unwrap();
        for (n, s) in states.iter().enumerate() {
            assert!((s.energy() - (n as f64 + 0.5)).abs() < 1e-5, "{n}: {}", s.energy());
            assert!(s.residual().unwrap() < 1e-6);
            let exact = harmonic_eigenstate(1.0, n, &g).unwrap();
            assert!((s.wave().inner(exact.wave()).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn eigensolver_linear_and_box() {
        let g = grid();
        let s = solve_stationary(&TrapPotential::Linear { slope: 1.5 }, 1, &g).unwrap();
        let airy = (1.5f64 * 1.5 / 2.0).powf(1.0 / 3.0) * 1.018_792_971_647_471;
        assert!((s[0].energy() - airy).abs() < 1e-3);
        // walls sit on the nodes at +-0.5, so the discrete box is exactly 1 wide
        let g = Grid::new(-2.0, 2.0, 401).unwrap();
        let walls = RealField::from_fn(g, |x| if x.abs() < 0.4999 { 0.0 } else { 1e6 }).unwrap();
        let s = solve_stationary(&TrapPotential::Tabulated(walls.clone()), 1, &g).unwrap();
        let e = PI * PI / 2.0;
        assert!((s[0].energy() - e).abs() < 0.01 * e, "{}", s[0].energy());
        let s = solve_stationary_with(&TrapPotential::Tabulated(walls), 1, &g, Stencil::ThreePoint).unwrap();
        assert!((s[0].energy() - e).abs() < 0.01 * e, "{}", s[0].energy());
    }

    #[test]
    fn leaking_state_is_flagged() {
        let g = Grid::new(-3.0, 3.0, 256).unwrap();
        let s = solve_stationary(&TrapPotential::Harmonic { omega: 0.1 }, 1, &g).unwrap();
        assert!(s[0].edge_leakage().is_some());
    }

    #[test]
    fn non_finite_trap_rejected() {
        let g = Grid::new(-3.0, 3.0, 64).unwrap();
        assert!(RealField::from_fn(g, |x| 1.0 / x.signum().max(0.0)).is_err());
        assert!(TrapPotential::Linear { slope: 0.0 }.evaluate(&g).is_err());
    }

    #[test]
    fn lattice_targets() {
        let g = grid();
        let one = lattice_target(&[0.0], 1.0, &[1.0], &g).unwrap();
        let h = harmonic_eigenstate(1.0, 0, &g).unwrap();
        for (a, b) in one.state.wave().values().iter().zip(h.wave().values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let five = lattice_target(&[-1.5, -0.75, 0.0, 0.75, 1.5], 64.0, &[1.0; 5], &g).unwrap();
        let w = five.state.wave();
        assert!((w.norm() - 1.0).abs() < 1e-10);
        assert_eq!(five.state.node_count(), 0);
        let v = w.values();
        let maxima = (1..v.len() - 1).filter(|&j| v[j] > v[j - 1] && v[j] >= v[j + 1]).count();
        assert_eq!(maxima, 5);
        assert!(five.overlap_warning);
        let two = lattice_target(&[-3.0, 3.0], 64.0, &[1.0, 1.0], &g).unwrap();
        assert!(two.state.wave().sample(0.0) <= 1e-10);
        assert!(!two.overlap_warning);
        assert!(lattice_target(&[1.0, 0.0], 64.0, &[1.0, 1.0], &g).is_err());
    }

    #[test]
    fn lattice_potential_matches_curvature_identity() {
        let g = grid();
        let t = lattice_target(&[-1.0, 1.0], 16.0, &[1.0, 1.0], &g).unwrap();
        let u = t.state.trap().evaluate(&g).unwrap();
        for j in 300..700 {
            let psi = t.state.wave().values()[j];
            let implied = t.state.energy() + 0.5 * t.state.second_derivative().values()[j] / psi;
            assert!((implied - u.values()[j]).abs() < 1e-8 * (1.0 + u.values()[j].abs()));
        }
    }
}
