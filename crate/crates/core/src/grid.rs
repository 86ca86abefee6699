//! Uniform 1D grid and the field algebra built on it.
//!
//! Units throughout the crate are hbar = m = 1, lengths in oscillator lengths
//! of the reference trap and energies in its quanta.

use num_complex::Complex64;
use std::sync::OnceLock;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 16;

/// Uniform grid `x_j = x_min + j dx`, `dx = (x_max - x_min) / (n - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "need finite x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Grid {
            x_min,
            x_max,
            n: n_points,
        })
    }

    /// A grid usable by the FFT-based operations (power-of-two length).
    pub fn spectral(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        let g = Self::new(x_min, x_max, n_points)?;
        g.require_spectral()?;
        Ok(g)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    /// Node `j`. Written as a weighted mean so that a symmetric grid is
    /// exactly antisymmetric, `x(j) == -x(n-1-j)`.
    pub fn x(&self, j: usize) -> f64 {
        let m = (self.n - 1) as f64;
        (self.x_min * (m - j as f64) + self.x_max * j as f64) / m
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn is_power_of_two(&self) -> bool {
        self.n.is_power_of_two()
    }

    pub fn require_spectral(&self) -> Result<()> {
        if self.is_power_of_two() {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!(
                "spectral operations need a power-of-two length, got {}",
                self.n
            )))
        }
    }

    /// Trapezoid quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut w = vec![dx; self.n];
        w[0] = 0.5 * dx;
        w[self.n - 1] = 0.5 * dx;
        w
    }

    /// Trapezoid integral of nodal values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(self.weights()).map(|(v, w)| v * w).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Index `k` with `x(k) <= x < x(k+1)` and the fractional position inside
    /// the cell. Points outside the grid are clamped to the end cells.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let p = ((x - self.x_min) / self.dx()).clamp(0.0, (self.n - 1) as f64);
        let k = (p.floor() as usize).min(self.n - 2);
        (k, p - k as f64)
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n;
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * self.dx());
        (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                m * dk
            })
            .collect()
    }

    fn check(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real (possibly signed) samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

/// Complex wavefunction samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexWave {
    grid: Grid,
    values: Vec<Complex64>,
}

fn wrong_length(grid: &Grid, got: usize) -> Error {
    Error::InvalidArgument(format!(
        "field has {got} samples, grid has {}",
        grid.len()
    ))
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(wrong_length(&grid, values.len()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "field",
                x: grid.x(j),
            });
        }
        Ok(RealField { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RealField { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        RealField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn inner(&self, other: &RealField) -> Result<f64> {
        self.grid.check(&other.grid)?;
        Ok(trapezoid_dot(&self.grid, &self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        trapezoid_dot(&self.grid, &self.values, &self.values).sqrt()
    }

    pub fn normalized(&self) -> Result<RealField> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero field".into()));
        }
        Ok(self.map(|v| v / n))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Linear interpolation at `x` (clamped to the grid).
    pub fn sample(&self, x: f64) -> f64 {
        let (k, w) = self.grid.locate(x);
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of sign changes, ignoring samples with `|v| <= floor`.
    pub fn sign_changes(&self, floor: f64) -> usize {
        let mut last = 0.0f64;
        let mut count = 0;
        for &v in &self.values {
            if v.abs() <= floor {
                continue;
            }
            if last != 0.0 && (v > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = v;
        }
        count
    }

    pub fn to_wave(&self) -> ComplexWave {
        ComplexWave {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

impl ComplexWave {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(wrong_length(&grid, values.len()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "wave",
                x: grid.x(j),
            });
        }
        Ok(ComplexWave { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        ComplexWave { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &ComplexWave) -> Result<Complex64> {
        self.grid.check(&other.grid)?;
        let w = self.grid.weights();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(&w)
            .map(|((a, b), w)| a.conj() * b * w)
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.density().iter().zip(self.grid.weights()).map(|(p, w)| p * w).sum::<f64>().sqrt()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn scaled(&self, s: f64) -> ComplexWave {
        ComplexWave {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn conj(&self) -> ComplexWave {
        ComplexWave {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }
}

fn trapezoid_dot(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let interior: f64 = a[1..n - 1].iter().zip(&b[1..n - 1]).map(|(x, y)| x * y).sum();
    grid.dx() * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    FiniteDifference,
    Spectral,
}

/// A derivative plus the edge amplitude (relative to the peak) when a
/// spectral derivative was taken of a field that does not decay at the edges.
#[derive(Clone, Debug)]
pub struct Derivative {
    pub field: RealField,
    pub edge_leakage: Option<f64>,
}

pub const EDGE_DECAY: f64 = 1e-10;

/// Second derivative: centered 5-point stencil with one-sided 5-point
/// stencils at the two edge pairs, or an FFT derivative.
pub fn second_derivative(f: &RealField, method: DerivativeMethod) -> Result<Derivative> {
    match method {
        DerivativeMethod::FiniteDifference => Ok(Derivative {
            field: RealField::from_raw(f.grid, fd_second(f.values(), f.grid.dx())),
            edge_leakage: None,
        }),
        DerivativeMethod::Spectral => {
            f.grid.require_spectral()?;
            let k = f.grid.wavenumbers();
            let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            spectral_apply(&mut buf, |j| -k[j] * k[j]);
            let peak = f.max_abs();
            let edge = f.values[0].abs().max(f.values[f.values.len() - 1].abs());
            let rel = if peak > 0.0 { edge / peak } else { 0.0 };
            Ok(Derivative {
                field: RealField::from_raw(f.grid, buf.iter().map(|c| c.re).collect()),
                edge_leakage: (rel > EDGE_DECAY).then_some(rel),
            })
        }
    }
}

pub(crate) fn fd_second(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    let h2 = 12.0 * dx * dx;
    let mut out = vec![0.0; n];
    for j in 2..n - 2 {
        out[j] = (-v[j - 2] + 16.0 * v[j - 1] - 30.0 * v[j] + 16.0 * v[j + 1] - v[j + 2]) / h2;
    }
    out[0] = (35.0 * v[0] - 104.0 * v[1] + 114.0 * v[2] - 56.0 * v[3] + 11.0 * v[4]) / h2;
    out[1] = (11.0 * v[0] - 20.0 * v[1] + 6.0 * v[2] + 4.0 * v[3] - v[4]) / h2;
    out[n - 1] = (35.0 * v[n - 1] - 104.0 * v[n - 2] + 114.0 * v[n - 3] - 56.0 * v[n - 4]
        + 11.0 * v[n - 5])
        / h2;
    out[n - 2] =
        (11.0 * v[n - 1] - 20.0 * v[n - 2] + 6.0 * v[n - 3] + 4.0 * v[n - 4] - v[n - 5]) / h2;
    out
}

/// First derivative with the same stencil layout as [`second_derivative`].
pub fn first_derivative(f: &RealField) -> RealField {
    RealField::from_raw(f.grid, fd_first(f.values(), f.grid.dx()))
}

pub(crate) fn fd_first(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    let h = 12.0 * dx;
    let mut out = vec![0.0; n];
    for j in 2..n - 2 {
        out[j] = (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / h;
    }
    out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / h;
    out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / h;
    out[n - 1] = (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4]
        + 3.0 * v[n - 5])
        / h;
    out[n - 2] = (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5]) / h;
    out
}

/// Multiply the spectrum of `buf` by `factor(j)` in place.
pub(crate) fn spectral_apply(buf: &mut [Complex64], factor: impl Fn(usize) -> f64) {
    let n = buf.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(buf);
    let scale = 1.0 / n as f64;
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= factor(j) * scale;
    }
    inv.process(buf);
}

/// `F(x) = int_0^x f`, accumulated cell by cell outward from the origin so
/// that `F(0) = 0` and odd/even symmetry of `f` is preserved on a symmetric
/// grid. When 0 falls between nodes the two part-cells next to it use the
/// same local interpolant as the full cells.
pub fn cumulative_integral(f: &RealField) -> Result<RealField> {
    let g = f.grid;
    if !g.contains(0.0) {
        return Err(Error::InvalidArgument(format!(
            "cumulative integral needs 0 inside [{}, {}]",
            g.x_min(),
            g.x_max()
        )));
    }
    Ok(RealField::from_raw(g, cumulative_from_origin(&g, f.values())))
}

/// Nodes of the local interpolant used for cell integrals.
pub const CELL_POINTS: usize = 12;

/// Six-point Gauss-Legendre rule on `[-1, 1]`, exact to degree 11.
const GAUSS6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152_0, 0.171_324_492_379_170_3),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152_0, 0.171_324_492_379_170_3),
];

/// Integral over `s in [a, b]` of each Lagrange basis polynomial on the
/// nodes `s = 0, 1, ..., points - 1` (`points <= 12`).
fn lagrange_weights(points: usize, a: f64, b: f64) -> Vec<f64> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (0..points)
        .map(|i| {
            GAUSS6
                .iter()
                .map(|&(z, w)| {
                    let s = mid + half * z;
                    let basis: f64 = (0..points)
                        .filter(|&k| k != i)
                        .map(|k| (s - k as f64) / (i as f64 - k as f64))
                        .product();
                    w * half * basis
                })
                .sum()
        })
        .collect()
}

/// `tables()[p][m]`: weights of the cell `[s_m, s_{m+1}]` for a
/// `p`-point stencil, `2 <= p <= CELL_POINTS`.
fn tables() -> &'static [Vec<Vec<f64>>] {
    static TABLES: OnceLock<Vec<Vec<Vec<f64>>>> = OnceLock::new();
    TABLES.get_or_init(|| {
        (0..=CELL_POINTS)
            .map(|p| (0..p.saturating_sub(1)).map(|m| lagrange_weights(p, m as f64, m as f64 + 1.0)).collect())
            .collect()
    })
}

/// Stencil `(start, points)` for the cell `[j, j+1]` inside the run
/// `lo..=hi`: centred where it fits, shifted inward at the run ends, so the
/// rule mirrors under `x -> -x` on a symmetric grid.
fn stencil(j: usize, lo: usize, hi: usize) -> (usize, usize) {
    let p = CELL_POINTS.min(hi - lo + 1);
    let start = j.saturating_sub(p / 2 - 1).clamp(lo, hi + 1 - p);
    (start, p)
}

/// `int_{x_j}^{x_{j+1}} f` for every cell from a local interpolant of
/// degree up to 11. Unlike the composite trapezoid rule the error stays
/// small relative to the local integrand far into decaying tails.
///
/// With a mask, stencils stay inside runs of valid nodes; cells touching an
/// invalid node get the trapezoid value.
pub(crate) fn cell_integrals(g: &Grid, v: &[f64], valid: Option<&[bool]>) -> Vec<f64> {
    let n = v.len();
    let dx = g.dx();
    let ok = |j: usize| valid.is_none_or(|m| m[j]);
    let mut run_lo = vec![0; n];
    for j in 1..n {
        run_lo[j] = if ok(j) && ok(j - 1) { run_lo[j - 1] } else { j };
    }
    let mut run_hi = vec![n - 1; n];
    for j in (0..n - 1).rev() {
        run_hi[j] = if ok(j) && ok(j + 1) { run_hi[j + 1] } else { j };
    }
    (0..n - 1)
        .map(|j| {
            if !(ok(j) && ok(j + 1)) {
                return 0.5 * dx * (v[j] + v[j + 1]);
            }
            let (start, p) = stencil(j, run_lo[j], run_hi[j]);
            let w = &tables()[p][j - start];
            dx * w.iter().zip(&v[start..start + p]).map(|(w, f)| w * f).sum::<f64>()
        })
        .collect()
}

pub(crate) fn cumulative_from_origin(g: &Grid, v: &[f64]) -> Vec<f64> {
    cumulative_from_origin_masked(g, v, None)
}

/// Primitive anchored at 0 built from [`cell_integrals`]. If 0 lies inside
/// a cell the two part-cells use that cell's interpolant.
pub(crate) fn cumulative_from_origin_masked(g: &Grid, v: &[f64], valid: Option<&[bool]>) -> Vec<f64> {
    let n = v.len();
    let dx = g.dx();
    let cells = cell_integrals(g, v, valid);
    let (mut k, mut w) = g.locate(0.0);
    if k + 1 < n && g.x(k + 1) == 0.0 {
        (k, w) = (k + 1, 0.0);
    }
    let mut out = vec![0.0; n];
    let right_start = if w == 0.0 || g.x(k) == 0.0 {
        k + 1
    } else {
        let ok = |j: usize| valid.is_none_or(|m| m[j]);
        if ok(k) && ok(k + 1) {
            let lo = (0..=k).rev().take_while(|&i| ok(i)).last().unwrap_or(k);
            let hi = (k + 1..n).take_while(|&i| ok(i)).last().unwrap_or(k + 1);
            let (start, p) = stencil(k, lo, hi);
            let m = (k - start) as f64;
            let part = |a: f64, b: f64| -> f64 {
                let lw = lagrange_weights(p, a, b);
                dx * lw.iter().zip(&v[start..start + p]).map(|(w, f)| w * f).sum::<f64>()
            };
            out[k + 1] = part(m + w, m + 1.0);
            out[k] = -part(m, m + w);
        } else {
            let f0 = (1.0 - w) * v[k] + w * v[k + 1];
            out[k + 1] = 0.5 * g.x(k + 1) * (f0 + v[k + 1]);
            out[k] = 0.5 * g.x(k) * (f0 + v[k]);
        }
        k + 2
    };
    for j in right_start..n {
        out[j] = out[j - 1] + cells[j - 1];
    }
    for j in (0..k).rev() {
        out[j] = out[j + 1] - cells[j];
    }
    out
}

/// Primitive vanishing at both ends of the grid: accumulated from the left
/// edge on the negative half-axis and from the right edge on the
/// non-negative half-axis. The two agree wherever `int f = 0`.
pub(crate) fn cumulative_from_edges(g: &Grid, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let cells = cell_integrals(g, v, None);
    let mut out = vec![0.0; n];
    let split = (0..n).find(|&j| g.x(j) >= 0.0).unwrap_or(n);
    for j in 1..split {
        out[j] = out[j - 1] + cells[j - 1];
    }
    for j in (split.max(1)..n - 1).rev() {
        out[j] = out[j + 1] - cells[j];
    }
    out
}

/// Spectral first derivative (any length; the Nyquist mode is dropped).
pub(crate) fn spectral_first(g: &Grid, v: &[f64]) -> Vec<f64> {
    let k = g.wavenumbers();
    let n = v.len();
    let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= Complex64::new(0.0, k[j] / n as f64);
    }
    if n % 2 == 0 {
        buf[n / 2] = Complex64::default();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}
