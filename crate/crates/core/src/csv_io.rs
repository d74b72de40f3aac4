//! Two-column waveform CSV files.
//!
//! Numbers are written in fixed notation with 17 significant digits, which
//! round-trips every finite `f64` exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::waveform::Waveform;

pub const HEADER: &str = "t,value";

/// Fixed-notation decimal with 17 significant digits (zero gets 17 decimals).
/// Non-finite values are written as `inf`, `-inf` or `NaN`.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = if x == 0.0 {
        -1
    } else {
        // the shortest representation always carries floor(log10 |x|)
        let s = format!("{:e}", x.abs());
        s[s.find('e').unwrap() + 1..].parse::<i32>().unwrap()
    };
    let decimals = (16 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Renders the file contents for `wf`.
pub fn waveform_csv_string(wf: &Waveform) -> String {
    let mut out = String::with_capacity(40 * (wf.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for (t, v) in wf.iter() {
        out.push_str(&format_f64(t));
        out.push(',');
        out.push_str(&format_f64(v));
        out.push('\n');
    }
    out
}

pub fn write_waveform_csv(wf: &Waveform, path: &Path) -> Result<()> {
    wf.validate()?;
    fs::write(path, waveform_csv_string(wf))?;
    Ok(())
}

/// Writes `header` followed by one comma-joined row per entry.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
        row,
        message: format!("{column} `{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            row,
            message: format!("{column} is not finite"),
        });
    }
    Ok(v)
}

/// A step that reproduces the time column exactly when one lies within a few
/// ulps of the observed spacing, else the mean spacing.
fn infer_step(t: &[f64]) -> f64 {
    let t0 = t[0];
    let reproduces = |step: f64| {
        t.iter()
            .enumerate()
            .all(|(n, &tn)| t0 + n as f64 * step == tn)
    };
    let mean = (t[t.len() - 1] - t0) / (t.len() - 1) as f64;
    for candidate in [t[1] - t0, mean] {
        let (mut up, mut down) = (candidate, candidate);
        for _ in 0..=8 {
            if reproduces(up) {
                return up;
            }
            if reproduces(down) {
                return down;
            }
            up = up.next_up();
            down = down.next_down();
        }
    }
    mean
}

/// Parses a waveform from file contents. Rows are numbered from 1 for the header.
pub fn parse_waveform_csv(text: &str) -> Result<Waveform> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        _ => {
            return Err(Error::Csv {
                row: 1,
                message: format!("expected header `{HEADER}`"),
            })
        }
    }
    let mut t = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let (Some(a), Some(b), None) = (cells.next(), cells.next(), cells.next()) else {
            return Err(Error::Csv {
                row,
                message: "expected two columns".into(),
            });
        };
        t.push(parse_cell(a, row, "t")?);
        values.push(parse_cell(b, row, "value")?);
    }
    if t.len() < 2 {
        return Err(Error::Csv {
            row: t.len() + 1,
            message: "at least two rows are needed to infer the sample step".into(),
        });
    }
    let step = infer_step(&t);
    if !(step > 0.0) {
        return Err(Error::Csv {
            row: 3,
            message: "time column must be increasing".into(),
        });
    }
    for (n, &tn) in t.iter().enumerate() {
        let slack = 1e-6 * step + 8.0 * f64::EPSILON * tn.abs().max(t[0].abs());
        if (t[0] + n as f64 * step - tn).abs() > slack {
            return Err(Error::Csv {
                row: n + 2,
                message: "time column is not uniformly spaced".into(),
            });
        }
    }
    Waveform::new(t[0], step, values)
}

pub fn read_waveform_csv(path: &Path) -> Result<Waveform> {
    parse_waveform_csv(&fs::read_to_string(path)?)
}
