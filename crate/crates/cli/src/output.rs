use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tigm::State;

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn print_json<S: Serialize>(value: &S) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// CSV writer on a file, or on standard output for `-`.
pub fn csv_writer(out: &str) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = if out == "-" {
        Box::new(io::stdout().lock())
    } else {
        Box::new(File::create(out).with_context(|| format!("creating {out}"))?)
    };
    Ok(csv::WriterBuilder::new().flexible(false).from_writer(sink))
}

fn labels(states: &[State]) -> Vec<String> {
    states.iter().map(State::label).collect()
}

/// Header of state labels, then one row per state in the same order.
pub fn write_matrix(path: &Path, states: &[State], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(labels(states))?;
    for row in rows {
        w.write_record(row.iter().map(|v| sci(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Header of state labels and a single row of values.
pub fn write_vector(path: &Path, states: &[State], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(labels(states))?;
    w.write_record(values.iter().map(|v| sci(*v)))?;
    w.flush()?;
    Ok(())
}
