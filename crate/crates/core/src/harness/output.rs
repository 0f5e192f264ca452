//! CSV and JSON-lines persistence of sweep results.
//!
//! The CSV column order is the plotting contract and never changes. Per-trial
//! rows carry the trial index in the `trial` column; each sweep point is
//! followed by two aggregate rows labelled `mean` and `std` (empty `seed`).
//! Absent metrics are empty cells (CSV) or `null` (JSON lines).

use std::io::{self, Write};

use serde_json::json;

use super::{AggregateRow, ResultRow, SweepOutput};
use crate::optimizer::FitResult;

pub const CSV_HEADER: &str = "sweep_value,trial,seed,nmse,sim_capacity,ideal_capacity,bound_lower,bound_upper,ber,iterations,wall_time_ms";

/// Formats a float losslessly: round-trip shortest decimal, switching to
/// scientific notation for very small magnitudes so path-loss-scale values
/// stay readable.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() >= 1e-4 {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn write_csv<W: Write + ?Sized>(w: &mut W, out: &SweepOutput) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for point in &out.points {
        for row in &point.rows {
            writeln!(w, "{}", csv_row(row))?;
        }
        writeln!(w, "{}", csv_aggregate(&point.mean))?;
        writeln!(w, "{}", csv_aggregate(&point.std))?;
    }
    Ok(())
}

fn csv_row(r: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        format_float(r.sweep_value),
        r.trial,
        r.seed,
        opt(r.nmse),
        opt(r.sim_capacity),
        opt(r.ideal_capacity),
        opt(r.bound_lower),
        opt(r.bound_upper),
        opt(r.ber),
        r.iterations.map(|i| i.to_string()).unwrap_or_default(),
        format_float(r.wall_time_ms),
    )
}

fn csv_aggregate(a: &AggregateRow) -> String {
    format!(
        "{},{},,{},{},{},{},{},{},{},{}",
        format_float(a.sweep_value),
        a.stat.label(),
        opt(a.nmse),
        opt(a.sim_capacity),
        opt(a.ideal_capacity),
        opt(a.bound_lower),
        opt(a.bound_upper),
        opt(a.ber),
        opt(a.iterations),
        opt(a.wall_time_ms),
    )
}

pub fn write_jsonl<W: Write + ?Sized>(w: &mut W, out: &SweepOutput) -> io::Result<()> {
    for point in &out.points {
        for r in &point.rows {
            let line = json!({
                "sweep_value": r.sweep_value,
                "trial": r.trial,
                "seed": r.seed,
                "nmse": r.nmse,
                "sim_capacity": r.sim_capacity,
                "ideal_capacity": r.ideal_capacity,
                "bound_lower": r.bound_lower,
                "bound_upper": r.bound_upper,
                "ber": r.ber,
                "iterations": r.iterations,
                "wall_time_ms": r.wall_time_ms,
            });
            writeln!(w, "{line}")?;
        }
        for a in [&point.mean, &point.std] {
            let line = json!({
                "sweep_value": a.sweep_value,
                "trial": a.stat.label(),
                "seed": serde_json::Value::Null,
                "nmse": a.nmse,
                "sim_capacity": a.sim_capacity,
                "ideal_capacity": a.ideal_capacity,
                "bound_lower": a.bound_lower,
                "bound_upper": a.bound_upper,
                "ber": a.ber,
                "iterations": a.iterations,
                "wall_time_ms": a.wall_time_ms,
            });
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

/// Loss trace of a single `fit` run, one row per iteration.
pub fn write_trace_csv<W: Write + ?Sized>(w: &mut W, result: &FitResult) -> io::Result<()> {
    writeln!(w, "iteration,loss")?;
    for (i, loss) in result.loss_trace.iter().enumerate() {
        writeln!(w, "{},{}", i, format_float(*loss))?;
    }
    Ok(())
}

pub fn render_csv(out: &SweepOutput) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, out).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn render_jsonl(out: &SweepOutput) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, out).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON output is UTF-8")
}
