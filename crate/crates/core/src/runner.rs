//! Scenario orchestration: design, truncate, propagate, report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::designer::{self, BoundaryDeviation, DesignedProtocol, SliceDiagnostics};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, with_workers, Execution};
use crate::output::{write_json, write_snapshots};
use crate::propagator::{propagate, EvolutionResult, PotentialSource, PropagationConfig, Recording};
use crate::scenario::{GridSpec, Scenario};

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub units: String,
    pub fidelity: f64,
    pub norm_drift: f64,
    /// Trapezoid norm of the final state.
    pub final_norm: f64,
    pub continuity_residual_max: f64,
    pub continuity_residual_stencil_max: f64,
    pub boundary_deviation: BoundaryDeviation,
    pub clamped_fraction_max: Option<f64>,
    pub edge_density_max: f64,
    pub edge_warning: bool,
    pub overlap: f64,
    pub t_f: f64,
    pub n_t: usize,
    pub dt: f64,
    pub steps: usize,
    pub truncation: Option<f64>,
    pub grid: GridSpec,
    pub snapshot_times: Vec<f64>,
    /// Trapezoid norm of the evolved wave at each snapshot time.
    pub snapshot_norms: Vec<f64>,
    pub wall_time_s: f64,
    pub diagnostics: Vec<SliceDiagnostics>,
}

pub struct RunOutcome {
    pub summary: RunSummary,
    pub protocol: DesignedProtocol,
    pub evolution: EvolutionResult,
}

fn snapshot_times(t_f: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t_f * k as f64 / (count - 1) as f64).collect()
}

/// Run a scenario without touching the filesystem.
pub fn execute(scenario: &Scenario, exec: Execution) -> Result<RunOutcome> {
    let start = Instant::now();
    let problem = scenario.problem()?;
    let protocol = designer::design(scenario, exec)?;
    let t_f = protocol.t_f();
    let times = snapshot_times(t_f, scenario.outputs.snapshots);
    let target = problem.target.wave().to_wave();
    let mut cfg = PropagationConfig::new(
        scenario.dt,
        PotentialSource::Designed {
            protocol: &protocol,
            truncation: scenario.truncation,
        },
    );
    cfg.record = Recording::Times(times.clone());
    cfg.target = Some(&target);
    let evolution = propagate(&problem.initial.wave().to_wave(), &cfg, t_f)?;
    let diags = protocol.diagnostics();
    let summary = RunSummary {
        name: scenario.name.clone(),
        units: scenario.units.clone(),
        fidelity: evolution.fidelity.unwrap_or(f64::NAN),
        norm_drift: evolution.norm_drift,
        final_norm: evolution.final_wave.norm(),
        continuity_residual_max: protocol.max_continuity_residual(),
        continuity_residual_stencil_max: diags.iter().map(|d| d.continuity_residual_stencil).fold(0.0, f64::max),
        boundary_deviation: protocol.boundary_deviation(),
        clamped_fraction_max: protocol.max_clamped_fraction(),
        edge_density_max: evolution.max_edge_density,
        edge_warning: evolution.edge_warning(),
        overlap: protocol.overlap(),
        t_f,
        n_t: scenario.n_t,
        dt: evolution.dt,
        steps: evolution.steps,
        truncation: scenario.truncation,
        grid: scenario.grid,
        snapshot_times: evolution.snapshots.iter().map(|s| s.t).collect(),
        snapshot_norms: evolution.snapshots.iter().map(|s| s.wave.norm()).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
        diagnostics: diags.to_vec(),
    };
    Ok(RunOutcome {
        summary,
        protocol,
        evolution,
    })
}

/// Output directory: explicit choice, else the scenario's own, else
/// `<root>/<name>` with `root` defaulting to `ffdrive-out`.
pub fn output_dir(scenario: &Scenario, explicit: Option<&Path>, root: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &scenario.outputs.dir {
        return p.clone();
    }
    root.unwrap_or(Path::new("ffdrive-out")).join(&scenario.name)
}

/// Run a scenario and write its snapshot tables and `summary.json` to
/// `out_dir`. Nothing is written unless the whole run succeeds.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path, exec: Execution) -> Result<RunSummary> {
    let outcome = execute(scenario, exec)?;
    write_run(out_dir, &outcome)?;
    Ok(outcome.summary)
}

pub fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = &outcome.protocol;
    let grid = *p.grid();
    let last = p.times().len() - 1;
    let slice_of = |t: f64| ((t / p.t_f() * last as f64).round() as usize).min(last);
    let times = &outcome.summary.snapshot_times;
    let slices: Vec<usize> = times.iter().map(|&t| slice_of(t)).collect();
    let frames = |fields: &'_ [crate::grid::RealField]| -> Vec<(f64, Vec<f64>)> {
        slices.iter().map(|&k| (p.times()[k], fields[k].values().to_vec())).collect()
    };
    let write = |name: &str, data: Vec<(f64, Vec<f64>)>| {
        write_snapshots(&dir.join(name), &grid, data.iter().map(|(t, v)| (*t, v.as_slice())))
    };
    write("V.csv", frames(p.potential()))?;
    write("V_trun.csv", frames(p.truncated_potential().unwrap_or(p.potential())))?;
    write("rho.csv", frames(p.rho()))?;
    let snaps = &outcome.evolution.snapshots;
    write("psi_abs2.csv", snaps.iter().map(|s| (s.t, s.wave.density())).collect())?;
    write("psi_re.csv", snaps.iter().map(|s| (s.t, s.wave.values().iter().map(|c| c.re).collect())).collect())?;
    write("psi_im.csv", snaps.iter().map(|s| (s.t, s.wave.values().iter().map(|c| c.im).collect())).collect())?;
    write_json(&dir.join("summary.json"), &outcome.summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub fidelity: Option<f64>,
    pub norm_drift: Option<f64>,
    pub error: Option<String>,
}

/// Fidelity versus truncation level. One protocol is designed and each
/// level is propagated independently; at most `workers` points run at once.
/// Per-point failures are kept as rows without a fidelity.
pub fn sweep_truncation(scenario: &Scenario, levels: &[f64], workers: Option<usize>, exec: Execution) -> Result<Vec<SweepRow>> {
    if levels.is_empty() {
        return Err(Error::Config("empty truncation list".into()));
    }
    if levels.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::Config("truncation levels must be positive".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("truncation levels must be strictly ascending".into()));
    }
    let problem = scenario.problem()?;
    let protocol = problem.design(exec)?;
    let psi0 = problem.initial.wave().to_wave();
    let target = problem.target.wave().to_wave();
    let t_f = protocol.t_f();
    let rows = with_workers(workers, || {
        map_indexed(levels.len(), exec, |i| {
            let c = levels[i];
            let mut cfg = PropagationConfig::new(
                scenario.dt,
                PotentialSource::Designed {
                    protocol: &protocol,
                    truncation: Some(c),
                },
            );
            cfg.target = Some(&target);
            match propagate(&psi0, &cfg, t_f) {
                Ok(r) => SweepRow {
                    c,
                    fidelity: r.fidelity,
                    norm_drift: Some(r.norm_drift),
                    error: None,
                },
                Err(e) => SweepRow {
                    c,
                    fidelity: None,
                    norm_drift: None,
                    error: Some(e.to_string()),
                },
            }
        })
    });
    Ok(rows)
}

/// Write `sweep.csv` (`c,fidelity`, empty fidelity for failed points) and
/// `sweep.json`.
pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.csv"))?);
    writeln!(w, "c,fidelity")?;
    for r in rows {
        match r.fidelity {
            Some(f) => writeln!(w, "{:.16e},{f:.16e}", r.c)?,
            None => writeln!(w, "{:.16e},", r.c)?,
        }
    }
    w.flush()?;
    write_json(&dir.join("sweep.json"), &rows)
}
