pub mod designer;
pub mod eigen;
pub mod error;
pub mod exec;
pub mod grid;
pub mod output;
pub mod propagator;
pub mod runner;
pub mod scenario;
pub mod schedule;
pub mod traps;

pub use error::{Category, Error, Result};
pub use exec::{with_workers, Execution};
