//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use ffdrive::designer::{DesignProblem, DesignedProtocol, InterpolationMode, WindowParams};
use ffdrive::grid::{ComplexWave, Grid, RealField};
use ffdrive::propagator::{observables, propagate, PotentialSource, PropagationConfig};
use ffdrive::runner::{execute, sweep_truncation, RunOutcome};
use ffdrive::scenario::{builtin, builtins};
use ffdrive::schedule::Schedule;
use ffdrive::traps::{harmonic_eigenstate, solve_stationary, StateOrigin, TrapPotential};
use ffdrive::Execution;
use num_complex::Complex64;

const EXEC: Execution = Execution::Parallel;

#[derive(Default)]
struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, what: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {id:<5} {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn run(name: &str) -> RunOutcome {
    execute(&builtin(name).unwrap(), EXEC).unwrap()
}

fn density(psi: &ComplexWave) -> Vec<f64> {
    psi.values().iter().map(|z| z.norm_sqr()).collect()
}

/// Largest `|V - exact|` over the window of slice `k`.
fn end_error(d: &DesignedProtocol, k: usize, exact: impl Fn(f64) -> f64) -> f64 {
    let g = d.grid();
    (0..g.len())
        .filter(|&j| d.window(k)[j])
        .map(|j| (d.potential()[k].values()[j] - exact(g.x(j))).abs())
        .fold(0.0, f64::max)
}

/// Curvature at x = 0 (a cell midpoint on the even grids used here).
fn center_curvature(d: &DesignedProtocol, k: usize) -> f64 {
    let v = d.potential()[k].values();
    let c = d.grid().len() / 2;
    let dx = d.grid().dx();
    (v[c - 2] - v[c - 1] - v[c] + v[c + 1]) / (2.0 * dx * dx)
}

/// Cubic midpoint interpolation of a field at x = 0.
fn at_origin(v: &[f64]) -> f64 {
    let c = v.len() / 2;
    (-v[c - 2] + 9.0 * v[c - 1] + 9.0 * v[c] - v[c + 1]) / 16.0
}

fn fig5(r: &mut Report) {
    let out = run("ground-to-excited");
    let f = out.summary.fidelity;
    r.check(
        "1",
        "ground->excited, c=8",
        (f - 0.9996).abs() <= 0.0015,
        format!("F = {f:.6} (target 0.9996 +- 0.0015), {:.1} s", out.summary.wall_time_s),
    );
}

fn plateau(r: &mut Report) {
    let levels = [0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 24.0, 32.0];
    let start = Instant::now();
    let rows = sweep_truncation(&builtin("ground-to-excited").unwrap(), &levels, None, EXEC).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let f: Vec<f64> = rows.iter().map(|row| row.fidelity.unwrap_or(f64::NAN)).collect();
    let tail: Vec<f64> = levels.iter().zip(&f).filter(|(c, _)| **c >= 8.0).map(|(_, f)| *f).collect();
    let flat = tail.windows(2).all(|w| w[1] >= w[0] - 1e-3);
    let low = f[0] < 0.9;
    let curve: Vec<String> = levels.iter().zip(&f).map(|(c, f)| format!("{c}:{f:.4}")).collect();
    r.check(
        "2",
        "truncation plateau",
        flat && low && levels.len() >= 8 && secs < 60.0,
        format!("{} ({} levels in {secs:.1} s)", curve.join(" "), levels.len()),
    );
}

fn expansion(r: &mut Report) {
    let out = run("expansion");
    let d = &out.protocol;
    let last = d.times().len() - 1;
    let e0 = end_error(d, 0, |x| 0.5 * x * x);
    let e1 = end_error(d, last, |x| x * x / 18.0);
    let min_curv = (1..last).map(|k| center_curvature(d, k)).fold(f64::INFINITY, f64::min);
    let f = out.summary.fidelity;
    r.check(
        "3",
        "expansion",
        f >= 0.9999 && e0 <= 1e-5 && e1 <= 1e-5 && min_curv < 0.0,
        format!("F = {f:.8}, |V(0)-x^2/2| = {e0:.1e}, |V(tf)-x^2/18| = {e1:.1e}, min V''(0,t) = {min_curv:.3}"),
    );
}

fn harmonic_to_linear(r: &mut Report) {
    let out = run("harmonic-to-linear");
    let d = &out.protocol;
    let last = d.times().len() - 1;
    let e0 = end_error(d, 0, |x| 0.5 * x * x);
    let e1 = end_error(d, last, |x| 1.5 * x.abs());
    let f = out.summary.fidelity;
    r.check(
        "4",
        "harmonic->linear",
        f >= 0.999 && e0 <= 1e-4 && e1 <= 1e-4,
        format!("F = {f:.8}, endpoint errors {e0:.1e} / {e1:.1e}"),
    );
}

fn split(r: &mut Report) {
    let out = run("split-5");
    let g = *out.protocol.grid();
    let rho = density(&out.evolution.final_wave);
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    let maxima = (1..g.len() - 1)
        .filter(|&j| rho[j] > rho[j - 1] && rho[j] > rho[j + 1] && rho[j] > 1e-3 * peak)
        .count();
    let cuts = [-1.125, -0.375, 0.375, 1.125];
    let mut pops = [0.0; 5];
    for j in 0..g.len() {
        let site = cuts.iter().filter(|&&c| g.x(j) > c).count();
        let w = if j == 0 || j == g.len() - 1 { 0.5 } else { 1.0 };
        pops[site] += w * rho[j] * g.dx();
    }
    let mean = pops.iter().sum::<f64>() / 5.0;
    let spread = pops.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max) / mean;
    let f = out.summary.fidelity;
    r.check(
        "5",
        "splitting into five",
        f >= 0.99 && maxima == 5 && spread <= 0.01,
        format!("F = {f:.6}, {maxima} maxima, population spread {spread:.1e}"),
    );
}

fn excited(r: &mut Report) {
    let out = run("excited-to-excited");
    let at0 = out.protocol.rho().iter().map(|rho| at_origin(rho.values()).abs()).fold(0.0, f64::max);
    let f = out.summary.fidelity;
    r.check(
        "6",
        "excited->excited",
        f >= 0.999 && at0 <= 1e-8,
        format!("F = {f:.8}, max |rho(0,t)| = {at0:.1e}"),
    );
}

fn design_properties(r: &mut Report) {
    let mut worst_res = (0.0f64, String::new());
    let mut boundary_ok = true;
    let mut boundary = Vec::new();
    let mut sym = 0.0f64;
    let mut asym = 0.0f64;
    for b in builtins() {
        let p = b.scenario.problem().unwrap();
        let d = p.design(EXEC).unwrap();
        let res = d.max_continuity_residual();
        if res > worst_res.0 {
            worst_res = (res, b.name.to_string());
        }
        let numerical = [p.initial.origin(), p.target.origin()].iter().any(|o| matches!(o, StateOrigin::Numerical(_)));
        let tol = if numerical { 1e-4 } else { 1e-5 };
        let dev = d.boundary_deviation();
        boundary_ok &= dev.initial <= tol && dev.final_ <= tol;
        boundary.push(format!("{} {:.0e}", b.name, dev.initial.max(dev.final_)));
        let n = d.grid().len();
        let parity = (0..d.times().len())
            .flat_map(|k| {
                let v = d.potential()[k].values();
                let w = d.window(k);
                (0..n).filter(move |&j| w[j] && w[n - 1 - j]).map(move |j| (v[j] - v[n - 1 - j]).abs())
            })
            .fold(0.0, f64::max);
        match b.name {
            "expansion" | "excited-to-excited" | "split-5" | "harmonic-to-linear" => sym = sym.max(parity),
            _ => asym = asym.max(parity),
        }
    }
    r.check(
        "7.1",
        "continuity residual",
        worst_res.0 <= 1e-6,
        format!("worst {:.1e} ({})", worst_res.0, worst_res.1),
    );
    r.check("7.2", "boundary identity", boundary_ok, boundary.join(", "));
    r.check(
        "7.3",
        "parity",
        sym <= 1e-6 && asym >= 0.1,
        format!("symmetric scenarios {sym:.1e}, ground->excited {asym:.2}"),
    );
}

fn identity(r: &mut Report) {
    let g = Grid::new(-12.0, 12.0, 1024).unwrap();
    let s = harmonic_eigenstate(1.0, 0, &g).unwrap();
    let t_f = 2.0;
    let p = DesignProblem {
        schedule: Schedule::new(t_f, s.energy(), s.energy()).unwrap(),
        initial: s.clone(),
        target: s.clone(),
        mode: InterpolationMode::Positive,
        window: WindowParams::default(),
        n_t: 200,
    };
    let d = p.design(EXEC).unwrap();
    // V = U_i up to the uniform offset -E - dphi0/dt of the phase convention
    let mut dev = 0.0f64;
    for (k, &t) in d.times().iter().enumerate() {
        let (_, dphi0) = p.schedule.phi0(t).unwrap();
        dev = dev.max(end_error(&d, k, |x| 0.5 * x * x - s.energy() - dphi0));
    }
    let psi = s.wave().to_wave();
    let mut cfg = PropagationConfig::new(1e-3, PotentialSource::Designed { protocol: &d, truncation: None });
    cfg.target = Some(&psi);
    let f = propagate(&psi, &cfg, t_f).unwrap().fidelity.unwrap();
    r.check(
        "7.4",
        "identity protocol",
        dev <= 1e-6 && f >= 1.0 - 1e-8,
        format!("|V - U_i - offset| = {dev:.1e}, 1 - F = {:.1e}", 1.0 - f),
    );
}

fn gaussian(g: Grid, shift: f64) -> ComplexWave {
    ComplexWave::from_fn(g, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * (x - shift).powi(2)).exp(), 0.0)).unwrap()
}

fn distance(a: &ComplexWave, b: &ComplexWave) -> f64 {
    let d: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(p, q)| p - q).collect();
    ComplexWave::new(*a.grid(), d).unwrap().norm()
}

fn propagator(r: &mut Report) {
    let g = Grid::new(-12.0, 12.0, 1024).unwrap();
    let zero = RealField::zeros(g);
    let free = propagate(&gaussian(g, 0.0), &PropagationConfig::new(1e-3, PotentialSource::Static(&zero)), 2.0).unwrap();
    let width = (2.0 * observables(&free.final_wave, None).unwrap().mean_x2).sqrt();
    let free_err = (width - 5f64.sqrt()).abs() / 5f64.sqrt();

    let v = RealField::from_fn(g, |x| 0.5 * x * x).unwrap();
    let cfg = PropagationConfig::new(1e-3, PotentialSource::Static(&v));
    let period = propagate(&gaussian(g, 1.0), &cfg, 2.0 * PI).unwrap();
    let period_err = (observables(&period.final_wave, None).unwrap().mean_x - 1.0).abs();
    r.check(
        "7.5",
        "propagator oracles",
        free_err <= 1e-5 && period_err <= 1e-5,
        format!("free width rel err {free_err:.1e}, coherent <x>(2pi) err {period_err:.1e}"),
    );

    let mut drift = free.norm_drift.max(period.norm_drift);
    for b in builtins() {
        drift = drift.max(execute(&b.scenario, EXEC).unwrap().summary.norm_drift);
    }
    r.check("7.6", "norm drift", drift <= 1e-8, format!("worst {drift:.1e} (oracles and all builtins)"));

    let problem = builtin("expansion").unwrap().problem().unwrap();
    let interp = problem.interpolator().unwrap();
    let t_f = problem.schedule.t_f();
    let on_demand = |t: f64, out: &mut [f64]| {
        let slice = problem.slice(&interp, t)?;
        out.copy_from_slice(slice.assembled.potential.values());
        Ok(())
    };
    let psi0 = problem.initial.wave().to_wave();
    let evolve = |steps: usize| {
        propagate(&psi0, &PropagationConfig::new(t_f / steps as f64, PotentialSource::Function(&on_demand)), t_f)
            .unwrap()
            .final_wave
    };
    let reference = evolve(3200);
    let ratio = distance(&evolve(100), &reference) / distance(&evolve(200), &reference);
    r.check(
        "7.7",
        "dt halving order",
        (ratio - 4.0).abs() <= 0.3 * 4.0,
        format!("error ratio {ratio:.3} (target 4 +- 30%)"),
    );
}

fn eigensolver(r: &mut Report) {
    let g = Grid::new(-12.0, 12.0, 2048).unwrap();
    let states = solve_stationary(&TrapPotential::Harmonic { omega: 1.0 }, 6, &g).unwrap();
    let spec = states.iter().enumerate().map(|(n, s)| (s.energy() - (n as f64 + 0.5)).abs()).fold(0.0, f64::max);
    r.check("7.8", "harmonic spectrum n <= 5", spec <= 1e-5, format!("max |E_n - (n + 1/2)| = {spec:.1e}"));

    let g = Grid::new(-12.0, 12.0, 1024).unwrap();
    let e = solve_stationary(&TrapPotential::Linear { slope: 1.5 }, 1, &g).unwrap()[0].energy();
    // first zero of Ai'
    let airy = (1.5f64 * 1.5 / 2.0).cbrt() * 1.018_792_971_647_471;
    r.check(
        "7.9",
        "linear trap ground energy",
        (e - airy).abs() <= 1e-3,
        format!("E = {e:.6}, Airy oracle {airy:.6}"),
    );
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut r = Report::default();
    fig5(&mut r);
    plateau(&mut r);
    expansion(&mut r);
    harmonic_to_linear(&mut r);
    split(&mut r);
    excited(&mut r);
    design_properties(&mut r);
    identity(&mut r);
    propagator(&mut r);
    eigensolver(&mut r);
    println!("acceptance: {} failed, {:.1} s", r.failed, start.elapsed().as_secs_f64());
    if r.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
