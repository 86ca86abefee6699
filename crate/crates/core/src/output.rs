//! Snapshot CSV files and JSON summaries.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::grid::Grid;

pub const CSV_HEADER: &str = "t,x,value";

/// Write `t,x,value` rows, time-major, 17 significant digits.
pub fn write_snapshots<'a>(path: &Path, grid: &Grid, frames: impl IntoIterator<Item = (f64, &'a [f64])>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    let xs = grid.points();
    for (t, values) in frames {
        for (x, v) in xs.iter().zip(values) {
            writeln!(w, "{t:.16e},{x:.16e},{v:.16e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parse a snapshot CSV back into `(t, values)` frames.
pub fn read_snapshots(path: &Path) -> Result<Vec<(f64, Vec<f64>)>> {
    let text = fs::read_to_string(path)?;
    let mut frames: Vec<(f64, Vec<f64>)> = Vec::new();
    for line in text.lines().skip(1) {
        let mut it = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| crate::Error::Config(format!("bad snapshot row {line:?}")))
        };
        let t = parse(it.next())?;
        let _x = parse(it.next())?;
        let v = parse(it.next())?;
        match frames.last_mut() {
            Some((tt, vals)) if *tt == t => vals.push(v),
            _ => frames.push((t, vec![v])),
        }
    }
    Ok(frames)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
