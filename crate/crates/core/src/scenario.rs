//! Declarative scenarios: TOML configuration, validation and the builtin
//! catalog.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::designer::{DesignProblem, InterpolationMode, WindowParams};
use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};
use crate::propagator::MIN_STEPS;
use crate::schedule::{EtaKind, PhaseConvention, Schedule};
use crate::traps::{harmonic_eigenstate, lattice_target, solve_stationary, Eigenstate, TrapPotential, MAX_HERMITE_INDEX};

pub const UNITS: &str = "hbar = m = 1; lengths in oscillator lengths and energies in quanta of the reference trap";

/// A duration given as a number or as a product such as `"0.24*2*pi"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Duration {
    Value(f64),
    Expr(String),
}

impl Duration {
    pub fn seconds(&self) -> Result<f64> {
        match self {
            Duration::Value(v) => Ok(*v),
            Duration::Expr(s) => parse_product(s),
        }
    }
}

fn parse_product(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot parse duration {s:?}"));
    let mut value = 1.0;
    let mut op = '*';
    let mut token = String::new();
    let apply = |tok: &str, op: char, value: &mut f64| -> Result<()> {
        let t = tok.trim();
        let f = if t.eq_ignore_ascii_case("pi") {
            PI
        } else {
            t.parse::<f64>().map_err(|_| bad())?
        };
        match op {
            '*' => *value *= f,
            _ => *value /= f,
        }
        Ok(())
    };
    for ch in s.chars() {
        if ch == '*' || ch == '/' {
            apply(&token, op, &mut value)?;
            token.clear();
            op = ch;
        } else {
            token.push(ch);
        }
    }
    apply(&token, op, &mut value)?;
    Ok(value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrapSpec {
    Harmonic {
        omega: f64,
    },
    Linear {
        slope: f64,
    },
    Lattice {
        centers: Vec<f64>,
        omega_site: f64,
        weights: Vec<f64>,
    },
    /// Potential values on the scenario grid.
    Tabulated {
        values: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Closed form for harmonic traps, numerical otherwise.
    #[default]
    Auto,
    Numerical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub trap: TrapSpec,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub solver: Solver,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_min: -12.0,
            x_max: 12.0,
            n: 1024,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Polynomial coefficients of `eta(s)`, `s = t / t_f`; quintic if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_coefficients: Option<Vec<f64>>,
    #[serde(default)]
    pub phase: PhaseConvention,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_snapshots() -> usize {
    9
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            snapshots: default_snapshots(),
        }
    }
}

fn default_n_t() -> usize {
    2000
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub units: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub t_f: Duration,
    #[serde(default)]
    pub interpolation: InterpolationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(default = "default_n_t")]
    pub n_t: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub grid: GridSpec,
    pub initial: StateSpec,
    #[serde(rename = "final")]
    pub target: StateSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub window: WindowParams,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn duration(&self) -> Result<f64> {
        self.t_f.seconds()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::spectral(self.grid.x_min, self.grid.x_max, self.grid.n).map_err(config)
    }

    /// Preflight checks that need no numerics beyond building the grid.
    pub fn validate(&self) -> Result<()> {
        if self.units.trim().is_empty() {
            return Err(Error::Config("missing units line".into()));
        }
        if self.name.trim().is_empty() {
            return Err(Error::Config("missing scenario name".into()));
        }
        let tf = self.duration()?;
        if !(tf > 0.0 && tf.is_finite()) {
            return Err(Error::Config(format!("t_f must be positive, got {tf}")));
        }
        let grid = self.grid()?;
        if !grid.contains(0.0) {
            return Err(Error::Config("grid must contain x = 0".into()));
        }
        if self.n_t < 2 {
            return Err(Error::Config(format!("n_t must be at least 2, got {}", self.n_t)));
        }
        if !(self.dt > 0.0 && self.dt <= tf / MIN_STEPS * (1.0 + 1e-12)) {
            return Err(Error::Config(format!(
                "dt must be in (0, t_f/{MIN_STEPS}] = (0, {}], got {}",
                tf / MIN_STEPS,
                self.dt
            )));
        }
        if let Some(c) = self.truncation {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("truncation must be positive, got {c}")));
            }
        }
        if self.outputs.snapshots < 2 {
            return Err(Error::Config("outputs.snapshots must be at least 2".into()));
        }
        self.window.validate().map_err(config)?;
        for (side, spec) in [("initial", &self.initial), ("final", &self.target)] {
            let trap = spec.trap.potential(&grid).map_err(|e| Error::Config(format!("{side}: {e}")))?;
            trap.validate().map_err(|e| Error::Config(format!("{side}: {e}")))?;
            if matches!(spec.trap, TrapSpec::Lattice { .. }) && spec.n != 0 {
                return Err(Error::Config(format!("{side}: lattice targets have n = 0")));
            }
        }
        if self.interpolation == InterpolationMode::Positive && (self.initial.n > 0 || self.target.n > 0) {
            return Err(Error::Config("positive interpolation needs node-free (n = 0) states".into()));
        }
        self.schedule(0.0, 0.0)?;
        Ok(())
    }

    pub fn schedule(&self, e_i: f64, e_f: f64) -> Result<Schedule> {
        let eta = match &self.schedule.eta_coefficients {
            None => EtaKind::Quintic,
            Some(c) => EtaKind::Polynomial(c.clone()),
        };
        Schedule::with(self.duration()?, e_i, e_f, eta, self.schedule.phase).map_err(config)
    }

    /// Build states, schedule and window into a design problem.
    pub fn problem(&self) -> Result<DesignProblem> {
        self.validate()?;
        let grid = self.grid()?;
        let initial = self.initial.state(&grid)?;
        let target = self.target.state(&grid)?;
        let schedule = self.schedule(initial.energy(), target.energy())?;
        Ok(DesignProblem {
            initial,
            target,
            schedule,
            mode: self.interpolation,
            window: self.window,
            n_t: self.n_t,
        })
    }
}

fn config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl TrapSpec {
    pub fn potential(&self, grid: &Grid) -> Result<TrapPotential> {
        Ok(match self {
            TrapSpec::Harmonic { omega } => TrapPotential::Harmonic { omega: *omega },
            TrapSpec::Linear { slope } => TrapPotential::Linear { slope: *slope },
            TrapSpec::Lattice {
                centers,
                omega_site,
                weights,
            } => TrapPotential::Lattice {
                centers: centers.clone(),
                omega_site: *omega_site,
                weights: weights.clone(),
            },
            TrapSpec::Tabulated { values } => TrapPotential::Tabulated(RealField::new(*grid, values.clone())?),
        })
    }
}

impl StateSpec {
    pub fn state(&self, grid: &Grid) -> Result<Eigenstate> {
        let trap = self.trap.potential(grid)?;
        match (&trap, self.solver) {
            (TrapPotential::Lattice {
                centers,
                omega_site,
                weights,
            }, _) => {
                let t = lattice_target(centers, *omega_site, weights, grid)?;
                if t.overlap_warning {
                    log::warn!(
                        "lattice sites overlap by {:e}; the target is not a set of independent ground states",
                        t.max_adjacent_overlap
                    );
                }
                Ok(t.state)
            }
            (TrapPotential::Harmonic { omega }, Solver::Auto) if self.n <= MAX_HERMITE_INDEX => {
                harmonic_eigenstate(*omega, self.n, grid)
            }
            _ => {
                let mut states = solve_stationary(&trap, self.n + 1, grid)?;
                let s = states.pop().expect("n + 1 states");
                if let Some(l) = s.edge_leakage() {
                    log::warn!("state {} reaches the grid edge (relative amplitude {l:e})", self.n);
                }
                Ok(s)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    pub scenario: Scenario,
}

fn harmonic(omega: f64, n: usize) -> StateSpec {
    StateSpec {
        trap: TrapSpec::Harmonic { omega },
        n,
        solver: Solver::Auto,
    }
}

fn base(name: &str, description: &str, t_f: &str, mode: InterpolationMode, initial: StateSpec, target: StateSpec) -> Scenario {
    Scenario {
        units: UNITS.into(),
        name: name.into(),
        description: description.into(),
        t_f: Duration::Expr(t_f.into()),
        interpolation: mode,
        truncation: None,
        n_t: default_n_t(),
        dt: default_dt(),
        grid: GridSpec::default(),
        initial,
        target,
        schedule: ScheduleSpec::default(),
        window: WindowParams::default(),
        outputs: OutputSpec::default(),
    }
}

/// The fixed scenario catalog, in a stable order.
pub fn builtins() -> Vec<Builtin> {
    use InterpolationMode::{Positive, Signed};
    let mut g2e = base(
        "ground-to-excited",
        "ground to first excited state of the same harmonic trap, signed path, truncation c = 8",
        "8*pi",
        Signed,
        harmonic(1.0, 0),
        harmonic(1.0, 1),
    );
    g2e.truncation = Some(8.0);
    let specs = vec![
        (
            "expansion",
            "harmonic expansion omega 1 -> 1/3 of the ground state",
            base(
                "expansion",
                "harmonic expansion omega 1 -> 1/3 of the ground state",
                "0.24*2*pi",
                Positive,
                harmonic(1.0, 0),
                harmonic(1.0 / 3.0, 0),
            ),
        ),
        (
            "harmonic-to-linear",
            "ground state of x^2/2 to ground state of 3|x|/2",
            base(
                "harmonic-to-linear",
                "ground state of x^2/2 to ground state of 3|x|/2",
                "0.24*2*pi",
                Positive,
                harmonic(1.0, 0),
                StateSpec {
                    trap: TrapSpec::Linear { slope: 1.5 },
                    n: 0,
                    solver: Solver::Numerical,
                },
            ),
        ),
        (
            "split-5",
            "split the ground state into five equal narrow wells 3/4 apart",
            base(
                "split-5",
                "split the ground state into five equal narrow wells 3/4 apart",
                "10*pi",
                Positive,
                harmonic(1.0, 0),
                StateSpec {
                    trap: TrapSpec::Lattice {
                        centers: vec![-1.5, -0.75, 0.0, 0.75, 1.5],
                        omega_site: 64.0,
                        weights: vec![1.0; 5],
                    },
                    n: 0,
                    solver: Solver::Auto,
                },
            ),
        ),
        (
            "excited-to-excited",
            "first excited state, harmonic expansion omega 1 -> 1/3, signed path",
            base(
                "excited-to-excited",
                "first excited state, harmonic expansion omega 1 -> 1/3, signed path",
                "0.48*2*pi",
                Signed,
                harmonic(1.0, 1),
                harmonic(1.0 / 3.0, 1),
            ),
        ),
        ("ground-to-excited", "ground to first excited state of the same harmonic trap, signed path, truncation c = 8", g2e),
    ];
    specs
        .into_iter()
        .map(|(name, description, scenario)| Builtin {
            name,
            description,
            scenario,
        })
        .collect()
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtins().into_iter().find(|b| b.name == name).map(|b| b.scenario)
}
