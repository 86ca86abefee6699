//! Strang split-operator propagation with a spectral kinetic step.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::designer::DesignedProtocol;
use crate::error::{Error, Result};
use crate::grid::{ComplexWave, Grid, RealField};

/// Relative step floor for designed protocols: `dt <= t_f / MIN_STEPS`.
pub const MIN_STEPS: f64 = 1000.0;
/// Edge density above which a propagation is flagged.
pub const EDGE_DENSITY_LIMIT: f64 = 1e-10;
/// Norm deviation above which [`fidelity`] logs a warning.
pub const NORM_WARNING: f64 = 1e-6;

pub type PotentialFn<'a> = dyn Fn(f64, &mut [f64]) -> Result<()> + Sync + 'a;

/// Where `V(x, t)` comes from.
#[derive(Clone, Copy)]
pub enum PotentialSource<'a> {
    /// Designer slices, linearly interpolated in time. With a truncation
    /// level each slice is clamped to `[-c, c]` before interpolating.
    Designed {
        protocol: &'a DesignedProtocol,
        truncation: Option<f64>,
    },
    Static(&'a RealField),
    /// Fills the potential at time `t` into the buffer.
    Function(&'a PotentialFn<'a>),
}

impl PotentialSource<'_> {
    fn fill(&self, t: f64, out: &mut [f64]) -> Result<()> {
        match self {
            PotentialSource::Designed { protocol, truncation } => {
                let times = protocol.times();
                let last = times.len() - 1;
                let pos = (t / protocol.t_f() * last as f64).clamp(0.0, last as f64);
                let k = (pos.floor() as usize).min(last - 1);
                let w = pos - k as f64;
                let (a, b) = (protocol.potential()[k].values(), protocol.potential()[k + 1].values());
                let c = truncation.unwrap_or(f64::INFINITY);
                for j in 0..out.len() {
                    out[j] = (1.0 - w) * a[j].clamp(-c, c) + w * b[j].clamp(-c, c);
                }
                Ok(())
            }
            PotentialSource::Static(v) => {
                out.copy_from_slice(v.values());
                Ok(())
            }
            PotentialSource::Function(f) => f(t, out),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Recording {
    #[default]
    None,
    /// Every `k`-th step, plus the initial and final states.
    Every(usize),
    /// The steps closest to the given times.
    Times(Vec<f64>),
}

#[derive(Clone)]
pub struct PropagationConfig<'a> {
    pub dt: f64,
    pub source: PotentialSource<'a>,
    pub record: Recording,
    /// When set, the fidelity with this state is reported.
    pub target: Option<&'a ComplexWave>,
}

impl<'a> PropagationConfig<'a> {
    pub fn new(dt: f64, source: PotentialSource<'a>) -> Self {
        PropagationConfig {
            dt,
            source,
            record: Recording::None,
            target: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub wave: ComplexWave,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub final_wave: ComplexWave,
    pub snapshots: Vec<Snapshot>,
    /// `| ||psi(t_f)|| - 1 |` relative to the initial norm.
    pub norm_drift: f64,
    pub fidelity: Option<f64>,
    /// Largest density seen at the two outermost points on either side.
    pub max_edge_density: f64,
    pub steps: usize,
    pub dt: f64,
}

impl EvolutionResult {
    pub fn edge_warning(&self) -> bool {
        self.max_edge_density > EDGE_DENSITY_LIMIT
    }
}

struct Stepper {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kinetic: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: &Grid, dt: f64) -> Self {
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scale = 1.0 / n as f64;
        let kinetic = grid
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(scale, -0.5 * k * k * dt))
            .collect();
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Stepper {
            fwd,
            inv,
            kinetic,
            scratch: vec![Complex64::default(); len],
        }
    }

    fn kinetic(&mut self, psi: &mut [Complex64]) {
        self.fwd.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut().zip(&self.kinetic).for_each(|(p, k)| *p *= k);
        self.inv.process_with_scratch(psi, &mut self.scratch);
    }
}

fn edge_density(psi: &[Complex64]) -> f64 {
    let n = psi.len();
    [0, 1, n - 2, n - 1].iter().map(|&j| psi[j].norm_sqr()).fold(0.0, f64::max)
}

fn check_config(psi0: &ComplexWave, config: &PropagationConfig<'_>, t_f: f64) -> Result<usize> {
    let grid = psi0.grid();
    grid.require_spectral()?;
    if !(t_f > 0.0 && t_f.is_finite()) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {t_f}")));
    }
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {}", config.dt)));
    }
    match &config.source {
        PotentialSource::Designed { protocol, truncation } => {
            if protocol.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if protocol.t_f() < t_f * (1.0 - 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "protocol covers [0, {}], propagation needs [0, {t_f}]",
                    protocol.t_f()
                )));
            }
            if config.dt > t_f / MIN_STEPS * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "dt = {} exceeds t_f / {MIN_STEPS} for a designed protocol",
                    config.dt
                )));
            }
            if let Some(c) = truncation {
                if !(*c > 0.0) {
                    return Err(Error::InvalidArgument(format!("truncation must be positive, got {c}")));
                }
            }
        }
        PotentialSource::Static(v) => {
            if v.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        PotentialSource::Function(_) => {}
    }
    if let Some(t) = config.target {
        if t.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    Ok(((t_f / config.dt) - 1e-9).ceil().max(1.0) as usize)
}

/// Evolve `psi0` over `[0, t_f]`. The potential is sampled at each step
/// midpoint and the state is never renormalized.
pub fn propagate(psi0: &ComplexWave, config: &PropagationConfig<'_>, t_f: f64) -> Result<EvolutionResult> {
    run(psi0, config, t_f, false)
}

/// Undo a forward propagation: start from the state at `t_f` and apply the
/// adjoint steps in reverse order, ending at `t = 0`.
pub fn propagate_backward(psi_tf: &ComplexWave, config: &PropagationConfig<'_>, t_f: f64) -> Result<EvolutionResult> {
    run(psi_tf, config, t_f, true)
}

fn run(psi0: &ComplexWave, config: &PropagationConfig<'_>, t_f: f64, backward: bool) -> Result<EvolutionResult> {
    let steps = check_config(psi0, config, t_f)?;
    let dt = t_f / steps as f64;
    let grid = *psi0.grid();
    let n = grid.len();
    let signed_dt = if backward { -dt } else { dt };
    let mut stepper = Stepper::new(&grid, signed_dt);
    let mut psi = psi0.values().to_vec();
    let norm0 = psi0.norm();
    let mut v = vec![0.0; n];
    let mut half = vec![Complex64::default(); n];

    let record_steps: Vec<usize> = match &config.record {
        Recording::None => vec![],
        Recording::Every(k) => {
            let k = (*k).max(1);
            let mut s: Vec<usize> = (0..=steps).step_by(k).collect();
            if s.last() != Some(&steps) {
                s.push(steps);
            }
            s
        }
        Recording::Times(ts) => ts
            .iter()
            .map(|t| ((t / dt).round().max(0.0) as usize).min(steps))
            .collect(),
    };
    let time_of = |step: usize| if backward { t_f - step as f64 * dt } else { step as f64 * dt };
    let mut snapshots = Vec::with_capacity(record_steps.len());
    let push = |step: usize, psi: &[Complex64], snaps: &mut Vec<Snapshot>| {
        for _ in record_steps.iter().filter(|&&s| s == step) {
            snaps.push(Snapshot {
                t: time_of(step),
                wave: ComplexWave::from_raw(grid, psi.to_vec()),
            });
        }
    };
    push(0, &psi, &mut snapshots);
    let mut max_edge = edge_density(&psi);
    for step in 0..steps {
        let t_mid = if backward {
            t_f - (step as f64 + 0.5) * dt
        } else {
            (step as f64 + 0.5) * dt
        };
        config.source.fill(t_mid, &mut v)?;
        for j in 0..n {
            if !v[j].is_finite() {
                return Err(Error::NonFinite {
                    what: "potential",
                    x: grid.x(j),
                });
            }
            half[j] = Complex64::from_polar(1.0, -0.5 * v[j] * signed_dt);
        }
        psi.iter_mut().zip(&half).for_each(|(p, h)| *p *= h);
        stepper.kinetic(&mut psi);
        psi.iter_mut().zip(&half).for_each(|(p, h)| *p *= h);
        max_edge = max_edge.max(edge_density(&psi));
        push(step + 1, &psi, &mut snapshots);
    }
    let final_wave = ComplexWave::from_raw(grid, psi);
    if final_wave.values().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite {
            what: "wavefunction",
            x: f64::NAN,
        });
    }
    let norm_drift = (final_wave.norm() / norm0 - 1.0).abs();
    let fidelity = config.target.map(|t| fidelity(&final_wave, t)).transpose()?;
    Ok(EvolutionResult {
        final_wave,
        snapshots,
        norm_drift,
        fidelity,
        max_edge_density: max_edge,
        steps,
        dt,
    })
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &ComplexWave, b: &ComplexWave) -> Result<f64> {
    let ov = a.inner(b)?;
    for (name, w) in [("first", a), ("second", b)] {
        let off = (w.norm() - 1.0).abs();
        if off > NORM_WARNING {
            log::warn!("fidelity: {name} state norm off by {off:e}");
        }
    }
    Ok(ov.norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observables {
    pub norm: f64,
    pub mean_x: f64,
    pub mean_x2: f64,
    /// `<T> + <V>` when a potential is supplied.
    pub energy: Option<f64>,
}

pub fn observables(psi: &ComplexWave, potential: Option<&RealField>) -> Result<Observables> {
    let grid = *psi.grid();
    let w = grid.weights();
    let rho = psi.density();
    let x = grid.points();
    let norm2: f64 = rho.iter().zip(&w).map(|(p, w)| p * w).sum();
    let mean = |f: &dyn Fn(usize) -> f64| (0..rho.len()).map(|j| f(j) * rho[j] * w[j]).sum::<f64>() / norm2;
    let energy = match potential {
        None => None,
        Some(v) => {
            if v.grid() != &grid {
                return Err(Error::GridMismatch);
            }
            grid.require_spectral()?;
            let n = grid.len();
            let mut buf = psi.values().to_vec();
            FftPlanner::new().plan_fft_forward(n).process(&mut buf);
            let k = grid.wavenumbers();
            let kin: f64 = buf.iter().zip(&k).map(|(c, k)| 0.5 * k * k * c.norm_sqr()).sum::<f64>()
                * grid.dx()
                / n as f64;
            Some(kin / norm2 + mean(&|j| v.values()[j]))
        }
    };
    Ok(Observables {
        norm: norm2.sqrt(),
        mean_x: mean(&|j| x[j]),
        mean_x2: mean(&|j| x[j] * x[j]),
        energy,
    })
}
