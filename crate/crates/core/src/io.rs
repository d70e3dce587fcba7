//! Field and trace files.
//!
//! Field files are CSV with header `x,u,v` (1D) or `x,y,u,v` (2D), one row
//! per node in node order, every number written with 17 significant digits
//! so that reading back reproduces the values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::energy::StatePair;
use crate::error::{NlsError, Result};
use crate::grid::{Field, GridSpec};
use crate::minimize::TraceRow;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fields_to_csv(s: &StatePair) -> String {
    let grid = s.grid();
    let mut out = String::from(if grid.dim() == 1 { "x,u,v\n" } else { "x,y,u,v\n" });
    for k in 0..grid.node_count() {
        let pos = grid.position(k);
        for c in &pos[..grid.dim()] {
            out.push_str(&num(*c));
            out.push(',');
        }
        writeln!(out, "{},{}", num(s.u().values()[k]), num(s.v().values()[k]))
            .expect("writing to a String cannot fail");
    }
    out
}

/// Parses a field file on `grid`. Coordinates must match the grid nodes.
pub fn fields_from_csv(text: &str, grid: &GridSpec) -> Result<StatePair> {
    let mut lines = text.lines();
    let expected_header = if grid.dim() == 1 { "x,u,v" } else { "x,y,u,v" };
    match lines.next().map(str::trim) {
        Some(h) if h == expected_header => {}
        other => {
            return Err(NlsError::FieldFile(format!(
                "expected header `{expected_header}`, found {other:?}"
            )))
        }
    }
    let (mut u, mut v) = (Vec::with_capacity(grid.node_count()), Vec::with_capacity(grid.node_count()));
    let tol = 1e-9 * grid.spacing();
    for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let cols = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| NlsError::FieldFile(format!("row {}: malformed number `{c}`", row + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if cols.len() != grid.dim() + 2 {
            return Err(NlsError::FieldFile(format!(
                "row {}: expected {} columns, got {}",
                row + 1,
                grid.dim() + 2,
                cols.len()
            )));
        }
        if row >= grid.node_count() {
            return Err(NlsError::FieldFile("more rows than grid nodes".into()));
        }
        let pos = grid.position(row);
        if (0..grid.dim()).any(|a| (cols[a] - pos[a]).abs() > tol) {
            return Err(NlsError::FieldFile(format!(
                "row {}: coordinates do not match the configured grid",
                row + 1
            )));
        }
        u.push(cols[grid.dim()]);
        v.push(cols[grid.dim() + 1]);
    }
    if u.len() != grid.node_count() {
        return Err(NlsError::FieldFile(format!(
            "expected {} rows, got {}",
            grid.node_count(),
            u.len()
        )));
    }
    StatePair::new(Field::from_values(*grid, u)?, Field::from_values(*grid, v)?)
}

pub fn write_fields(path: &Path, s: &StatePair) -> Result<()> {
    fs::write(path, fields_to_csv(s))?;
    Ok(())
}

pub fn read_fields(path: &Path, grid: &GridSpec) -> Result<StatePair> {
    fields_from_csv(&fs::read_to_string(path)?, grid)
}

pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iter,I,grad_norm,t0,step\n");
    for r in trace {
        writeln!(out, "{},{},{},{},{}", r.iter, num(r.energy), num(r.grad_norm), num(r.t0), num(r.step))
            .expect("writing to a String cannot fail");
    }
    out
}
