//! Inverse design of the driving potential.
//!
//! The amplitude path `rho(x,t) = N(t) [(1 - eta) a_i + eta a_f]` is
//! prescribed; the velocity follows from the continuity equation and the
//! potential from
//!
//! `V = d/dt int_0^x u + rho_xx / (2 rho) - u^2 / 2 - phi0'(t)`,
//!
//! with every time derivative taken analytically.

mod finite_part;
mod window;

use serde::{Deserialize, Serialize};

pub use window::{Node, TrustWindow, WindowParams};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::grid::{cumulative_from_edges, cumulative_from_origin_masked, fd_first, fd_second, spectral_first, Grid, RealField};
use crate::schedule::{Jet, Schedule};
use crate::traps::Eigenstate;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationMode {
    /// Interpolate the moduli `|psi_i|`, `|psi_f|` (node-free states only).
    #[default]
    Positive,
    /// Interpolate the signed amplitudes; nodes may appear and move.
    Signed,
}

/// Endpoint amplitudes and curvatures prepared for interpolation.
#[derive(Clone, Debug)]
pub struct Interpolator {
    grid: Grid,
    a_i: Vec<f64>,
    a_f: Vec<f64>,
    curv_i: Vec<f64>,
    curv_f: Vec<f64>,
    overlap: f64,
}

/// Amplitude, its time derivatives and its curvature at one instant.
#[derive(Clone, Debug)]
pub struct RhoSlice {
    pub t: f64,
    pub eta: Jet,
    /// `N`, `dN/dt`, `d2N/dt2`.
    pub norm: Jet,
    pub rho: RealField,
    pub drho_dt: RealField,
    pub d2rho_dt2: RealField,
    pub d2rho_dx2: RealField,
}

impl Interpolator {
    pub fn new(psi_i: &Eigenstate, psi_f: &Eigenstate, mode: InterpolationMode) -> Result<Self> {
        let grid = *psi_i.grid();
        if psi_f.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        let prep = |s: &Eigenstate| -> Result<(Vec<f64>, Vec<f64>)> {
            let w = s.wave().values();
            let c = s.second_derivative().values();
            match mode {
                InterpolationMode::Signed => Ok((w.to_vec(), c.to_vec())),
                InterpolationMode::Positive => {
                    if s.node_count() > 0 {
                        return Err(Error::NodalState(format!(
                            "state {} has {} nodes",
                            s.quantum_number(),
                            s.node_count()
                        )));
                    }
                    let sign = if w.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                    Ok((w.iter().map(|v| (sign * v).max(0.0)).collect(), c.iter().map(|v| sign * v).collect()))
                }
            }
        };
        let (a_i, curv_i) = prep(psi_i)?;
        let (a_f, curv_f) = prep(psi_f)?;
        let ai = RealField::from_raw(grid, a_i);
        let af = RealField::from_raw(grid, a_f);
        let overlap = ai.inner(&af)?;
        Ok(Interpolator {
            grid,
            a_i: ai.into_values(),
            a_f: af.into_values(),
            curv_i,
            curv_f,
            overlap,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `<a_i|a_f>`.
    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    /// Normalization `N(eta) = [(1-eta)^2 + eta^2 + 2 eta (1-eta) S]^{-1/2}`
    /// and its time derivatives along the schedule.
    pub fn normalization(&self, eta: &Jet) -> Result<Jet> {
        let e = eta.value;
        let k = 1.0 - self.overlap;
        let d = 1.0 - 2.0 * k * (e - e * e);
        if !(d > 1e-12) {
            return Err(Error::Collinear { eta: e });
        }
        let d_e = -2.0 * k * (1.0 - 2.0 * e);
        let d_ee = 4.0 * k;
        let n = d.powf(-0.5);
        let n_e = -0.5 * d.powf(-1.5) * d_e;
        let n_ee = 0.75 * d.powf(-2.5) * d_e * d_e - 0.5 * d.powf(-1.5) * d_ee;
        Ok(Jet {
            value: n,
            rate: n_e * eta.rate,
            accel: n_ee * eta.rate * eta.rate + n_e * eta.accel,
        })
    }

    pub fn at(&self, schedule: &Schedule, t: f64) -> Result<RhoSlice> {
        let eta = schedule.eta(t)?;
        let nj = self.normalization(&eta)?;
        let e = eta.value;
        let (n, nd, ndd) = (nj.value, nj.rate, nj.accel);
        let len = self.a_i.len();
        let mut rho = Vec::with_capacity(len);
        let mut rt = Vec::with_capacity(len);
        let mut rtt = Vec::with_capacity(len);
        let mut rxx = Vec::with_capacity(len);
        for j in 0..len {
            let delta = self.a_f[j] - self.a_i[j];
            let b = self.a_i[j] + e * delta;
            rho.push(n * b);
            rt.push(nd * b + n * eta.rate * delta);
            rtt.push(ndd * b + 2.0 * nd * eta.rate * delta + n * eta.accel * delta);
            rxx.push(n * ((1.0 - e) * self.curv_i[j] + e * self.curv_f[j]));
        }
        let g = self.grid;
        Ok(RhoSlice {
            t,
            eta,
            norm: nj,
            rho: RealField::from_raw(g, rho),
            drho_dt: RealField::from_raw(g, rt),
            d2rho_dt2: RealField::from_raw(g, rtt),
            d2rho_dx2: RealField::from_raw(g, rxx),
        })
    }
}

pub fn interpolate_rho(
    psi_i: &Eigenstate,
    psi_f: &Eigenstate,
    schedule: &Schedule,
    mode: InterpolationMode,
    t: f64,
) -> Result<RhoSlice> {
    Interpolator::new(psi_i, psi_f, mode)?.at(schedule, t)
}

fn flux(rho: &[f64], rt: &[f64]) -> Vec<f64> {
    rho.iter().zip(rt).map(|(r, d)| 2.0 * r * d).collect()
}

/// Window for a slice, built from `rho` and the flux of `d(rho^2)/dt`.
pub fn trust_window(rho: &RealField, drho_dt: &RealField, params: &WindowParams) -> Result<TrustWindow> {
    if rho.grid() != drho_dt.grid() {
        return Err(Error::GridMismatch);
    }
    let g = rho.grid();
    let a = cumulative_from_edges(g, &flux(rho.values(), drho_dt.values()));
    TrustWindow::from_flux(g, rho.values(), &a, params)
}

/// `u = (1/rho^2) int 2 rho rho_t`, with the flux taken to vanish at both
/// grid ends, clamped to the nearest window value outside the window.
pub fn hydrodynamic_velocity(rho: &RealField, drho_dt: &RealField, window: &TrustWindow) -> Result<RealField> {
    if rho.grid() != drho_dt.grid() {
        return Err(Error::GridMismatch);
    }
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let g = rho.grid();
    let a = cumulative_from_edges(g, &flux(rho.values(), drho_dt.values()));
    let mut u: Vec<f64> = (0..a.len())
        .map(|j| if window.contains(j) { a[j] / rho.values()[j].powi(2) } else { 0.0 })
        .collect();
    window.clamp(&mut u);
    Ok(RealField::from_raw(*g, u))
}

/// Inputs of the potential formula at one instant. Without a curvature the
/// 5-point stencil of the grid is used.
#[derive(Clone, Debug)]
pub struct PotentialInputs<'a> {
    pub rho: &'a RealField,
    pub drho_dt: &'a RealField,
    pub d2rho_dt2: &'a RealField,
    pub d2rho_dx2: Option<&'a RealField>,
}

/// Potential and intermediates at one instant.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub potential: RealField,
    pub velocity: RealField,
    /// `d/dt int_0^x u` before clamping, in the finite-part sense.
    pub drift: RealField,
    /// `rho^2 u` (the flux), before clamping.
    pub flux: Vec<f64>,
    /// `d(rho^2)/dt`.
    pub density_rate: Vec<f64>,
}

pub fn assemble_potential(
    inputs: &PotentialInputs<'_>,
    schedule: &Schedule,
    t: f64,
    window: &TrustWindow,
    params: &WindowParams,
) -> Result<Assembled> {
    let g = *inputs.rho.grid();
    for f in [inputs.drho_dt, inputs.d2rho_dt2].into_iter().chain(inputs.d2rho_dx2) {
        if f.grid() != &g {
            return Err(Error::GridMismatch);
        }
    }
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let rho = inputs.rho.values();
    let rt = inputs.drho_dt.values();
    let rtt = inputs.d2rho_dt2.values();
    let stencil;
    let rxx = match inputs.d2rho_dx2 {
        Some(f) => f.values(),
        None => {
            stencil = fd_second(rho, g.dx());
            &stencil
        }
    };
    let n = rho.len();
    let q = flux(rho, rt);
    let qt: Vec<f64> = (0..n).map(|j| 2.0 * (rt[j] * rt[j] + rho[j] * rtt[j])).collect();
    let a = cumulative_from_edges(&g, &q);
    let a_t = cumulative_from_edges(&g, &qt);
    let mut u = vec![0.0; n];
    let mut u_t = vec![0.0; n];
    for j in 0..n {
        if rho[j] != 0.0 {
            let r2 = rho[j] * rho[j];
            u[j] = a[j] / r2;
            u_t[j] = a_t[j] / r2 - 2.0 * a[j] * rt[j] / (r2 * rho[j]);
        }
    }
    let (drift, _) = finite_part::primitive(&g, &u_t, window.fit_mask(), window.nodes(), params);
    let (_, phi_rate) = schedule.phi0(t)?;
    let mut v = vec![0.0; n];
    for j in 0..n {
        if window.contains(j) {
            v[j] = drift[j] + 0.5 * rxx[j] / rho[j] - 0.5 * u[j] * u[j] - phi_rate;
            if !v[j].is_finite() {
                return Err(Error::NonFinite {
                    what: "potential inside trust window",
                    x: g.x(j),
                });
            }
        }
    }
    window.clamp(&mut v);
    window.clamp(&mut u);
    Ok(Assembled {
        potential: RealField::from_raw(g, v),
        velocity: RealField::from_raw(g, u),
        drift: RealField::from_raw(g, drift),
        flux: a,
        density_rate: q,
    })
}

/// Clamp to `[-c, c]`.
pub fn truncate(v: &RealField, c: f64) -> Result<RealField> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level must be positive, got {c}")));
    }
    Ok(v.map(|x| x.clamp(-c, c)))
}

/// Fraction of points with `|v| >= c`.
pub fn clamped_fraction(v: &RealField, c: f64) -> f64 {
    v.values().iter().filter(|x| x.abs() >= c).count() as f64 / v.values().len() as f64
}

/// Everything needed to design a protocol.
#[derive(Clone, Debug)]
pub struct DesignProblem {
    pub initial: Eigenstate,
    pub target: Eigenstate,
    pub schedule: Schedule,
    pub mode: InterpolationMode,
    pub window: WindowParams,
    pub n_t: usize,
}

/// One designed time slice.
#[derive(Clone, Debug)]
pub struct Slice {
    pub rho: RhoSlice,
    pub window: TrustWindow,
    pub assembled: Assembled,
    pub diagnostics: SliceDiagnostics,
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceDiagnostics {
    pub t: f64,
    pub eta: f64,
    pub norm_factor: f64,
    pub norm_error: f64,
    pub window_fraction: f64,
    pub nodes: Vec<f64>,
    pub node_radii: Vec<f64>,
    /// `max |d(rho^2)/dt - d(rho^2 u)/dx| / max |d(rho^2)/dt|` on the window,
    /// spatial derivative spectral, time derivative analytic.
    pub continuity_residual: f64,
    /// The same residual with the 5-point first-derivative stencil.
    pub continuity_residual_stencil: f64,
    pub clamped_fraction: Option<f64>,
}

impl DesignProblem {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.initial.grid() != self.target.grid() {
            return Err(Error::GridMismatch);
        }
        if !self.initial.grid().contains(0.0) {
            return Err(Error::InvalidArgument("the grid must contain x = 0".into()));
        }
        if self.n_t < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 time slices, got {}", self.n_t)));
        }
        Ok(())
    }

    pub fn interpolator(&self) -> Result<Interpolator> {
        Interpolator::new(&self.initial, &self.target, self.mode)
    }

    pub fn times(&self) -> Vec<f64> {
        let tf = self.schedule.t_f();
        (0..self.n_t).map(|k| tf * k as f64 / (self.n_t - 1) as f64).collect()
    }

    /// Design a single slice at time `t`.
    pub fn slice(&self, interp: &Interpolator, t: f64) -> Result<Slice> {
        let rs = interp.at(&self.schedule, t)?;
        let window = trust_window(&rs.rho, &rs.drho_dt, &self.window)?;
        let assembled = assemble_potential(
            &PotentialInputs {
                rho: &rs.rho,
                drho_dt: &rs.drho_dt,
                d2rho_dt2: &rs.d2rho_dt2,
                d2rho_dx2: Some(&rs.d2rho_dx2),
            },
            &self.schedule,
            t,
            &window,
            &self.window,
        )?;
        let diagnostics = slice_diagnostics(&rs, &window, &assembled);
        Ok(Slice {
            rho: rs,
            window,
            assembled,
            diagnostics,
        })
    }

    pub fn design(&self, exec: Execution) -> Result<DesignedProtocol> {
        self.validate()?;
        let interp = self.interpolator()?;
        let times = self.times();
        let slices = map_indexed(times.len(), exec, |k| {
            self.slice(&interp, times[k]).map_err(|e| e.at_slice(k, times[k]))
        });
        let mut rho = Vec::with_capacity(times.len());
        let mut u = Vec::with_capacity(times.len());
        let mut v = Vec::with_capacity(times.len());
        let mut diagnostics = Vec::with_capacity(times.len());
        let mut norm_factors = Vec::with_capacity(times.len());
        let mut windows = Vec::with_capacity(times.len());
        for s in slices {
            let s = s?;
            norm_factors.push(s.rho.norm.value);
            rho.push(s.rho.rho);
            u.push(s.assembled.velocity);
            v.push(s.assembled.potential);
            windows.push(s.window.mask().to_vec());
            diagnostics.push(s.diagnostics);
        }
        let grid = *interp.grid();
        let boundary = boundary_deviation(self, &v, &windows)?;
        Ok(DesignedProtocol {
            grid,
            t_f: self.schedule.t_f(),
            times,
            rho,
            u,
            v,
            v_truncated: None,
            truncation: None,
            overlap: interp.overlap(),
            norm_factors,
            windows,
            diagnostics,
            boundary,
        })
    }
}

fn slice_diagnostics(rs: &RhoSlice, window: &TrustWindow, asm: &Assembled) -> SliceDiagnostics {
    let rho = rs.rho.values();
    let n = rho.len();
    let dx = rs.rho.grid().dx();
    let q = &asm.density_rate;
    let u = asm.velocity.values();
    let j_flux: Vec<f64> = (0..n).map(|j| rho[j] * rho[j] * u[j]).collect();
    let scale = (0..n).filter(|&j| window.contains(j)).map(|j| q[j].abs()).fold(0.0, f64::max);
    let inside = |j: usize, r: usize| j >= r && j + r < n && (j - r..=j + r).all(|i| window.contains(i));
    // rho^2 u equals the flux on the window; the flux continues it smoothly
    // elsewhere so the spectral derivative sees no clamping artefacts.
    let smooth: Vec<f64> = (0..n).map(|j| if window.contains(j) { j_flux[j] } else { asm.flux[j] }).collect();
    let ds = spectral_first(rs.rho.grid(), &smooth);
    let d5 = fd_first(&j_flux, dx);
    let (mut res, mut res5) = (0.0f64, 0.0f64);
    for j in 0..n {
        if window.contains(j) {
            res = res.max((q[j] - ds[j]).abs());
        }
        if inside(j, 2) {
            res5 = res5.max((q[j] - d5[j]).abs());
        }
    }
    let (res, res5) = if scale > 0.0 { (res / scale, res5 / scale) } else { (res, res5) };
    SliceDiagnostics {
        t: rs.t,
        eta: rs.eta.value,
        norm_factor: rs.norm.value,
        norm_error: (rs.rho.norm() - 1.0).abs(),
        window_fraction: window.fraction(),
        nodes: window.nodes().iter().map(|nd| nd.x).collect(),
        node_radii: window.nodes().iter().map(|nd| nd.radius).collect(),
        continuity_residual: res,
        continuity_residual_stencil: res5,
        clamped_fraction: None,
    }
}

/// Largest deviation of the end slices from the end traps on their windows,
/// after removing the constant fixed by the phase convention.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundaryDeviation {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_: f64,
}

fn boundary_deviation(p: &DesignProblem, v: &[RealField], windows: &[Vec<bool>]) -> Result<BoundaryDeviation> {
    let g = *p.initial.grid();
    let dev = |state: &Eigenstate, t: f64, slice: &RealField, mask: &[bool]| -> Result<f64> {
        let u = state.trap().evaluate(&g)?;
        let offset = -state.energy() - p.schedule.phi0(t)?.1;
        Ok((0..g.len())
            .filter(|&j| mask[j])
            .map(|j| (slice.values()[j] - u.values()[j] - offset).abs())
            .fold(0.0, f64::max))
    };
    let last = v.len() - 1;
    Ok(BoundaryDeviation {
        initial: dev(&p.initial, 0.0, &v[0], &windows[0])?,
        final_: dev(&p.target, p.schedule.t_f(), &v[last], &windows[last])?,
    })
}

/// The designed movie and its diagnostics.
#[derive(Clone, Debug)]
pub struct DesignedProtocol {
    grid: Grid,
    t_f: f64,
    times: Vec<f64>,
    rho: Vec<RealField>,
    u: Vec<RealField>,
    v: Vec<RealField>,
    v_truncated: Option<Vec<RealField>>,
    truncation: Option<f64>,
    overlap: f64,
    norm_factors: Vec<f64>,
    windows: Vec<Vec<bool>>,
    diagnostics: Vec<SliceDiagnostics>,
    boundary: BoundaryDeviation,
}

impl DesignedProtocol {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rho(&self) -> &[RealField] {
        &self.rho
    }

    pub fn velocity(&self) -> &[RealField] {
        &self.u
    }

    pub fn potential(&self) -> &[RealField] {
        &self.v
    }

    pub fn truncated_potential(&self) -> Option<&[RealField]> {
        self.v_truncated.as_deref()
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn norm_factors(&self) -> &[f64] {
        &self.norm_factors
    }

    /// Trust-window mask of slice `k`.
    pub fn window(&self, k: usize) -> &[bool] {
        &self.windows[k]
    }

    pub fn diagnostics(&self) -> &[SliceDiagnostics] {
        &self.diagnostics
    }

    pub fn boundary_deviation(&self) -> BoundaryDeviation {
        self.boundary
    }

    pub fn max_continuity_residual(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.continuity_residual).fold(0.0, f64::max)
    }

    /// Attach the truncated movie at level `c`.
    pub fn with_truncation(mut self, c: f64) -> Result<Self> {
        let vt = self.v.iter().map(|v| truncate(v, c)).collect::<Result<Vec<_>>>()?;
        for (d, v) in self.diagnostics.iter_mut().zip(&self.v) {
            d.clamped_fraction = Some(clamped_fraction(v, c));
        }
        self.v_truncated = Some(vt);
        self.truncation = Some(c);
        Ok(self)
    }

    /// Largest clamped fraction over all slices (requires truncation).
    pub fn max_clamped_fraction(&self) -> Option<f64> {
        self.diagnostics.iter().map(|d| d.clamped_fraction).try_fold(0.0f64, |m, f| f.map(|f| m.max(f)))
    }

    /// Phase `phi(x,t) = phi0(t) - int_0^x u` of slice `k` (diagnostic only).
    pub fn phase(&self, k: usize, schedule: &Schedule) -> Result<RealField> {
        let (phi0, _) = schedule.phi0(self.times[k])?;
        let w = cumulative_from_origin_masked(&self.grid, self.u[k].values(), Some(&self.windows[k]));
        Ok(RealField::from_raw(self.grid, w.into_iter().map(|v| phi0 - v).collect()))
    }
}

/// Design the protocol of a scenario, attaching its truncated movie when the
/// scenario sets a truncation level.
pub fn design(scenario: &crate::scenario::Scenario, exec: Execution) -> Result<DesignedProtocol> {
    let p = scenario.problem()?.design(exec)?;
    match scenario.truncation {
        Some(c) => p.with_truncation(c),
        None => Ok(p),
    }
}

/// Agreement between the analytic drift and a difference quotient of the
/// velocity primitive, see [`drift_cross_check`].
#[derive(Clone, Copy, Debug)]
pub struct DriftCheck {
    pub relative: f64,
    pub points: usize,
}

/// Compare the analytic `d/dt int u` at `t` with a fourth-order centered
/// difference of `int u` over `t +- h, t +- 2h`. The primitive of `u` gets
/// the same pole subtraction as the drift, since plain quadrature of the
/// `1/y^2` next to a node is only good to a few 1e-4. Both sides are taken
/// relative to a reference point inside each connected run of the common
/// window (the one closest to the origin), so per-run constants drop out.
pub fn drift_cross_check(problem: &DesignProblem, t: f64, h: f64) -> Result<DriftCheck> {
    let interp = problem.interpolator()?;
    let mid = problem.slice(&interp, t)?;
    let g = *interp.grid();
    let prim = |tt: f64| -> Result<(Vec<f64>, Vec<bool>)> {
        let rs = interp.at(&problem.schedule, tt)?;
        let w = trust_window(&rs.rho, &rs.drho_dt, &problem.window)?;
        let a = cumulative_from_edges(&g, &flux(rs.rho.values(), rs.drho_dt.values()));
        let u: Vec<f64> = a.iter().zip(rs.rho.values()).map(|(a, r)| a / (r * r)).collect();
        let (p, _) = finite_part::primitive(&g, &u, w.fit_mask(), w.nodes(), &problem.window);
        Ok((p, w.mask().to_vec()))
    };
    let shifted = [-2.0, -1.0, 1.0, 2.0]
        .iter()
        .map(|s| prim(t + s * h))
        .collect::<Result<Vec<_>>>()?;
    let common: Vec<bool> = (0..g.len())
        .map(|j| mid.window.contains(j) && shifted.iter().all(|(_, w)| w[j]))
        .collect();
    let diff = |j: usize| {
        let p = |i: usize| shifted[i].0[j];
        (p(0) - 8.0 * p(1) + 8.0 * p(2) - p(3)) / (12.0 * h)
    };
    let drift = mid.assembled.drift.values();
    let (mut scale, mut err, mut points) = (0.0f64, 0.0f64, 0);
    let mut j = 0;
    while j < g.len() {
        if !common[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j < g.len() && common[j] {
            j += 1;
        }
        let r = (start..j).min_by(|&a, &b| g.x(a).abs().total_cmp(&g.x(b).abs())).unwrap();
        let (d0, f0) = (drift[r], diff(r));
        for k in start..j {
            let a = drift[k] - d0;
            scale = scale.max(a.abs());
            err = err.max((diff(k) - f0 - a).abs());
        }
        points += j - start;
    }
    Ok(DriftCheck { relative: if scale > 0.0 { err / scale } else { err }, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_overlap(s: f64) -> Interpolator {
        let grid = Grid::new(-1.0, 1.0, 16).unwrap();
        Interpolator {
            grid,
            a_i: vec![0.0; 16],
            a_f: vec![0.0; 16],
            curv_i: vec![0.0; 16],
            curv_f: vec![0.0; 16],
            overlap: s,
        }
    }

    fn eta(v: f64) -> Jet {
        Jet { value: v, rate: 0.3, accel: -0.2 }
    }

    #[test]
    fn orthogonal_midpoint_norm() {
        let n = with_overlap(0.0).normalization(&eta(0.5)).unwrap();
        assert!((n.value - 2f64.sqrt()).abs() < 1e-15);
        assert!(n.rate.abs() < 1e-15);
    }

    #[test]
    fn opposite_amplitudes_are_collinear() {
        assert!(matches!(with_overlap(-1.0).normalization(&eta(0.5)), Err(Error::Collinear { .. })));
        assert!(with_overlap(-1.0).normalization(&eta(0.2)).is_ok());
    }

    #[test]
    fn norm_derivatives_match_differences() {
        let it = with_overlap(0.37);
        let h = 1e-5;
        let at = |e: f64| it.normalization(&Jet { value: e, rate: 1.0, accel: 0.0 }).unwrap();
        let (lo, mid, hi) = (at(0.3 - h), at(0.3), at(0.3 + h));
        assert!((mid.rate - (hi.value - lo.value) / (2.0 * h)).abs() < 1e-8);
        assert!((mid.accel - (hi.value - 2.0 * mid.value + lo.value) / (h * h)).abs() < 1e-4);
    }

    #[test]
    fn truncation_clamps() {
        let g = Grid::new(-1.0, 1.0, 16).unwrap();
        let mut vals = vec![0.0; 16];
        vals[0] = 10.0;
        vals[1] = -12.0;
        vals[2] = 3.0;
        let v = RealField::new(g, vals).unwrap();
        let t = truncate(&v, 8.0).unwrap();
        assert_eq!(&t.values()[..3], &[8.0, -8.0, 3.0]);
        assert_eq!(truncate(&v, f64::INFINITY).unwrap().values(), v.values());
        assert!(truncate(&v, 0.0).is_err());
        assert!((clamped_fraction(&v, 8.0) - 2.0 / 16.0).abs() < 1e-15);
    }
}
