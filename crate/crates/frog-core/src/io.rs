//! On-disk formats shared with the CLI.
//!
//! - Trace CSV: a `# frog-trace N=<N> L=<L> R=<R>` header line followed by R
//!   rows of N nonnegative decimal values.
//! - Pulse CSV: a `# pulse N=<N>` header line followed by N rows of `re,im`.
//! - Solve reports are serialized as JSON.
//!
//! Floats are written with Rust's shortest round-trip formatting, so write
//! then read reproduces the value bits exactly and identical data always
//! produces identical bytes.

use crate::error::{FrogError, Result};
use crate::pulse::Pulse;
use crate::solver::SolveReport;
use crate::trace::{delay_count, FrogTrace};
use ndarray::Array2;
use num_complex::Complex64;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn parse_error(path: &Path, line: usize, what: impl Into<String>) -> FrogError {
    FrogError::Parse {
        path: path.display().to_string(),
        line,
        what: what.into(),
    }
}

/// Parses `key=value` fields out of a `# name k=v k=v` header line.
fn header_fields<'a>(
    path: &Path,
    line: &'a str,
    expected_name: &str,
    keys: &[&str],
) -> Result<Vec<usize>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| parse_error(path, 1, "missing `#` header line"))?
        .trim();
    let mut parts = body.split_whitespace();
    let name = parts.next().unwrap_or_default();
    if name != expected_name {
        return Err(parse_error(
            path,
            1,
            format!("expected `{expected_name}` header, found `{name}`"),
        ));
    }
    let mut fields = vec![None; keys.len()];
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| parse_error(path, 1, format!("malformed header field `{part}`")))?;
        if let Some(slot) = keys.iter().position(|&k| k == key) {
            let parsed = value
                .parse::<usize>()
                .map_err(|_| parse_error(path, 1, format!("invalid {key}=`{value}`")))?;
            fields[slot] = Some(parsed);
        } else {
            return Err(parse_error(path, 1, format!("unknown header field `{key}`")));
        }
    }
    fields
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or_else(|| parse_error(path, 1, format!("missing header field {}", keys[i]))))
        .collect()
}

/// Writes a trace as CSV.
pub fn write_trace_csv(path: impl AsRef<Path>, z_data: &FrogTrace) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    writeln!(
        out,
        "# frog-trace N={} L={} R={}",
        z_data.n(),
        z_data.stride(),
        z_data.delays()
    )
    .expect("string write");
    for p in 0..z_data.delays() {
        let row: Vec<String> = z_data
            .values()
            .row(p)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        writeln!(out, "{}", row.join(",")).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a trace CSV; negative entries are clipped to zero.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<FrogTrace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let fields = header_fields(path, header, "frog-trace", &["N", "L", "R"])?;
    let (n, stride, r) = (fields[0], fields[1], fields[2]);
    if stride == 0 || stride >= n {
        return Err(parse_error(path, 1, format!("invalid stride L={stride} for N={n}")));
    }
    if r != delay_count(n, stride) {
        return Err(parse_error(
            path,
            1,
            format!("R={} inconsistent with ceil(N/L)={}", r, delay_count(n, stride)),
        ));
    }
    let mut values = Array2::zeros((r, n));
    let mut row_index = 0usize;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if row_index >= r {
            return Err(parse_error(path, line_no, format!("more than {r} data rows")));
        }
        let entries: Vec<&str> = line.split(',').collect();
        if entries.len() != n {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {n} values, found {}", entries.len()),
            ));
        }
        for (k, entry) in entries.iter().enumerate() {
            let value: f64 = entry
                .trim()
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("invalid number `{entry}`")))?;
            values[(row_index, k)] = value;
        }
        row_index += 1;
    }
    if row_index != r {
        return Err(parse_error(path, 1, format!("expected {r} data rows, found {row_index}")));
    }
    FrogTrace::new(values, stride, n)
}

/// Writes a pulse as CSV.
pub fn write_pulse_csv(path: impl AsRef<Path>, pulse: &Pulse) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    writeln!(out, "# pulse N={}", pulse.len()).expect("string write");
    for s in pulse.samples() {
        writeln!(out, "{},{}", s.re, s.im).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a pulse CSV.
pub fn read_pulse_csv(path: impl AsRef<Path>) -> Result<Pulse> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let fields = header_fields(path, header, "pulse", &["N"])?;
    let n = fields[0];
    let mut samples = Vec::with_capacity(n);
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if samples.len() >= n {
            return Err(parse_error(path, line_no, format!("more than {n} samples")));
        }
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| parse_error(path, line_no, "expected `re,im`"))?;
        let re: f64 = re
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("invalid number `{re}`")))?;
        let im: f64 = im
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("invalid number `{im}`")))?;
        samples.push(Complex64::new(re, im));
    }
    if samples.len() != n {
        return Err(parse_error(
            path,
            1,
            format!("expected {n} samples, found {}", samples.len()),
        ));
    }
    Pulse::new(samples)
}

/// Serializes a solve report as pretty JSON.
pub fn write_report_json(path: impl AsRef<Path>, report: &SolveReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| FrogError::Numeric {
        what: format!("report serialization failed: {e}"),
    })?;
    fs::write(path.as_ref(), text)?;
    Ok(())
}
