use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ffdrive::runner::{self, RunSummary};
use ffdrive::scenario::{builtin, builtins, Scenario};
use ffdrive::{with_workers, Category, Error, Execution};

const OUT_ENV: &str = "FFDRIVE_OUT_DIR";

/// Fast-forward trap design and verification.
#[derive(Parser)]
#[command(name = "ffdrive", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Output directory (default: the config's own, else $FFDRIVE_OUT_DIR/<name>, else ffdrive-out/<name>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for slice evaluation and sweep points
    #[arg(long)]
    workers: Option<usize>,
    /// Override the number of grid points
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    /// Override the propagator step
    #[arg(long)]
    dt: Option<f64>,
    /// Evaluate slices and sweep points on one thread
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Design, propagate and report one scenario (a TOML file or a builtin name)
    Run {
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Fidelity versus truncation level
    Sweep {
        config: String,
        /// Comma-separated truncation levels, ascending
        #[arg(long = "c", value_delimiter = ',', required = true, num_args = 1..)]
        c: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// List the builtin scenarios
    Builtins {
        /// Print each builtin as a TOML config instead
        #[arg(long)]
        toml: bool,
    },
}

fn load(config: &str, common: &Common) -> Result<Scenario, Error> {
    let path = Path::new(config);
    let mut s = if path.exists() {
        Scenario::load(path)?
    } else if let Some(s) = builtin(config) {
        s
    } else {
        return Err(Error::Config(format!("no config file or builtin named {config:?}")));
    };
    if let Some(n) = common.grid_n {
        s.grid.n = n;
    }
    if let Some(dt) = common.dt {
        s.dt = dt;
    }
    s.validate()?;
    Ok(s)
}

fn out_dir(s: &Scenario, common: &Common) -> PathBuf {
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from);
    runner::output_dir(s, common.out.as_deref(), root.as_deref())
}

fn exec(common: &Common) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn report(s: &RunSummary) -> serde_json::Value {
    serde_json::json!({
        "name": s.name,
        "fidelity": s.fidelity,
        "norm_drift": s.norm_drift,
        "continuity_residual_max": s.continuity_residual_max,
        "boundary_deviation": s.boundary_deviation,
        "clamped_fraction_max": s.clamped_fraction_max,
        "edge_warning": s.edge_warning,
        "wall_time_s": s.wall_time_s,
    })
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Builtins { toml } => {
            for b in builtins() {
                if toml {
                    println!("# {}\n{}", b.name, b.scenario.to_toml());
                } else {
                    println!("{}\t{}", b.name, b.description);
                }
            }
        }
        Command::Run { config, common } => {
            let s = load(&config, &common)?;
            let dir = out_dir(&s, &common);
            let summary = with_workers(common.workers, || runner::run_scenario(&s, &dir, exec(&common)))?;
            if summary.edge_warning {
                eprintln!("warning: density at the grid edges reached {:.3e}", summary.edge_density_max);
            }
            println!("{}", report(&summary));
        }
        Command::Sweep { config, c, common } => {
            let s = load(&config, &common)?;
            let dir = out_dir(&s, &common);
            let rows = runner::sweep_truncation(&s, &c, common.workers, exec(&common))?;
            runner::write_sweep(&dir, &rows)?;
            for r in &rows {
                match (r.fidelity, &r.error) {
                    (Some(f), _) => println!("{}\t{f:.8}", r.c),
                    (None, Some(e)) => println!("{}\t-\t{e}", r.c),
                    (None, None) => println!("{}\t-", r.c),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            let err = serde_json::json!({
                "error": category.to_string(),
                "slice": e.slice(),
                "message": e.to_string(),
            });
            eprintln!("{err}");
            // An unwritable output directory is a configuration problem.
            match category {
                Category::Numeric => ExitCode::from(3),
                Category::Config | Category::Io => ExitCode::from(2),
            }
        }
    }
}
