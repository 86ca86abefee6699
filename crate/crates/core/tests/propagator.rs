use std::f64::consts::PI;

use ffdrive::designer::DesignProblem;
use ffdrive::grid::{ComplexWave, Grid, RealField};
use ffdrive::propagator::{fidelity, observables, propagate, propagate_backward, PotentialSource, PropagationConfig};
use ffdrive::scenario::builtin;
use ffdrive::Execution;
use num_complex::Complex64;

fn grid() -> Grid {
    Grid::new(-12.0, 12.0, 1024).unwrap()
}

fn gaussian(g: Grid, shift: f64) -> ComplexWave {
    ComplexWave::from_fn(g, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * (x - shift).powi(2)).exp(), 0.0)).unwrap()
}

#[test]
fn free_gaussian_spreads_as_sqrt_one_plus_t2() {
    let g = grid();
    let zero = RealField::zeros(g);
    let psi = gaussian(g, 0.0);
    let r = propagate(&psi, &PropagationConfig::new(1e-3, PotentialSource::Static(&zero)), 2.0).unwrap();
    let o = observables(&r.final_wave, None).unwrap();
    let width = (2.0 * o.mean_x2).sqrt();
    let exact = 5f64.sqrt();
    assert!(((width - exact) / exact).abs() < 1e-6, "{width}");
    assert!(r.norm_drift < 1e-8);
}

#[test]
fn coherent_state_returns_after_one_period() {
    let g = grid();
    let v = RealField::from_fn(g, |x| 0.5 * x * x).unwrap();
    let psi = gaussian(g, 1.0);
    let cfg = PropagationConfig::new(1e-3, PotentialSource::Static(&v));
    let half = propagate(&psi, &cfg, PI).unwrap();
    assert!((observables(&half.final_wave, None).unwrap().mean_x + 1.0).abs() < 1e-5);
    let full = propagate(&psi, &cfg, 2.0 * PI).unwrap();
    let o = observables(&full.final_wave, Some(&v)).unwrap();
    assert!((o.mean_x - 1.0).abs() < 1e-5, "{}", o.mean_x);
    assert!((o.energy.unwrap() - 1.0).abs() < 1e-6);
    assert!(full.norm_drift < 1e-8);
}

#[test]
fn designed_protocol_is_time_reversible() {
    let s = builtin("excited-to-excited").unwrap();
    let problem = s.problem().unwrap();
    let protocol = problem.design(Execution::Parallel).unwrap();
    let psi0 = problem.initial.wave().to_wave();
    let cfg = PropagationConfig::new(1e-3, PotentialSource::Designed { protocol: &protocol, truncation: None });
    let fwd = propagate(&psi0, &cfg, protocol.t_f()).unwrap();
    let back = propagate_backward(&fwd.final_wave, &cfg, protocol.t_f()).unwrap();
    assert!(fidelity(&back.final_wave, &psi0).unwrap() >= 1.0 - 1e-8);
    assert!(fwd.norm_drift < 1e-8 && back.norm_drift < 1e-8);
}

fn distance(a: &ComplexWave, b: &ComplexWave) -> f64 {
    let d: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(p, q)| p - q).collect();
    ComplexWave::new(*a.grid(), d).unwrap().norm()
}

/// Slices evaluated on demand, so the only time discretization is the step.
#[test]
fn step_error_is_second_order() {
    let s = builtin("expansion").unwrap();
    let problem: DesignProblem = s.problem().unwrap();
    let interp = problem.interpolator().unwrap();
    let t_f = problem.schedule.t_f();
    let on_demand = |t: f64, out: &mut [f64]| {
        let slice = problem.slice(&interp, t)?;
        out.copy_from_slice(slice.assembled.potential.values());
        Ok(())
    };
    let psi0 = problem.initial.wave().to_wave();
    let run = |steps: usize| {
        propagate(&psi0, &PropagationConfig::new(t_f / steps as f64, PotentialSource::Function(&on_demand)), t_f)
            .unwrap()
            .final_wave
    };
    let reference = run(3200);
    let coarse = distance(&run(100), &reference);
    let fine = distance(&run(200), &reference);
    let ratio = coarse / fine;
    assert!((ratio - 4.0).abs() <= 0.3 * 4.0, "ratio {ratio} ({coarse:e} / {fine:e})");
}
