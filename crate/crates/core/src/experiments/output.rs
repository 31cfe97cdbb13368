use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "step,t,l2_u,l2_T,l2_C,gnorm_u,bound,elapsed_s";

/// Diagnostics of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesRecord {
    pub step: usize,
    pub t: f64,
    pub l2_u: f64,
    pub l2_t: Option<f64>,
    pub l2_c: Option<f64>,
    /// `‖U_{n+1}‖_G²` of the velocity triple.
    pub gnorm_u: Option<f64>,
    /// Right side of the velocity energy bound at this step.
    pub bound: Option<f64>,
    pub elapsed_s: f64,
}

fn cell(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        let _ = write!(out, "{v:.16e}");
    }
}

/// CSV text with [`CSV_HEADER`] and one row per record. Absent values are
/// empty cells; numbers carry 17 significant digits.
pub fn format_csv(records: &[TimeSeriesRecord]) -> String {
    let mut out = String::with_capacity(CSV_HEADER.len() + 1 + records.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{}", r.step);
        cell(&mut out, Some(r.t));
        cell(&mut out, Some(r.l2_u));
        cell(&mut out, r.l2_t);
        cell(&mut out, r.l2_c);
        cell(&mut out, r.gnorm_u);
        cell(&mut out, r.bound);
        cell(&mut out, Some(r.elapsed_s));
        out.push('\n');
    }
    out
}

pub fn write_csv(records: &[TimeSeriesRecord], path: &Path) -> Result<()> {
    std::fs::write(path, format_csv(records)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses text produced by [`format_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<TimeSeriesRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("missing or unexpected CSV header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 8 {
                return Err(Error::Config(format!("expected 8 cells, got {}: '{line}'", cells.len())));
            }
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| Error::Config(format!("bad number '{s}'")))
                }
            };
            let req = |s: &str| opt(s)?.ok_or_else(|| Error::Config(format!("missing value in '{line}'")));
            Ok(TimeSeriesRecord {
                step: cells[0]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad step '{}'", cells[0])))?,
                t: req(cells[1])?,
                l2_u: req(cells[2])?,
                l2_t: opt(cells[3])?,
                l2_c: opt(cells[4])?,
                gnorm_u: opt(cells[5])?,
                bound: opt(cells[6])?,
                elapsed_s: req(cells[7])?,
            })
        })
        .collect()
}
