//! Deterministic CSV emission and parsing for experiment results.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::runner::{ExperimentError, StepRecord};

pub const CSV_HEADER: &str = "run,step,reward,cum_reward,cum_disc_reward,plan_ms,seed";

/// Format a float with 6 significant digits, plain decimal notation where
/// reasonable, scientific otherwise. Integer-valued floats print without a
/// fractional part.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    if x == x.trunc() && x.abs() < 1e15 {
        return format!("{x:.0}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Render records as CSV text: fixed header, one row per record, rows
/// already ordered by (run, step).
pub fn render_csv(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.run,
            r.step,
            format_sig(r.reward),
            format_sig(r.cum_reward),
            format_sig(r.cum_disc_reward),
            format_sig(r.plan_ms),
            r.seed
        );
    }
    out
}

/// Write records to a file, surfacing failures with the path attached.
pub fn write_csv(records: &[StepRecord], path: &Path) -> Result<(), ExperimentError> {
    fs::write(path, render_csv(records)).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parse CSV text produced by [`render_csv`].
pub fn read_csv(text: &str) -> Result<Vec<StepRecord>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    if header.trim_end() != CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(format!("line {}: expected 7 fields, got {}", idx + 2, fields.len()));
        }
        let parse_u32 = |s: &str, what: &str| -> Result<u32, String> {
            s.parse().map_err(|_| format!("line {}: bad {what} {s:?}", idx + 2))
        };
        let parse_f64 = |s: &str, what: &str| -> Result<f64, String> {
            let v: f64 = s.parse().map_err(|_| format!("line {}: bad {what} {s:?}", idx + 2))?;
            if v.is_nan() {
                return Err(format!("line {}: {what} is NaN", idx + 2));
            }
            Ok(v)
        };
        records.push(StepRecord {
            run: parse_u32(fields[0], "run")?,
            step: parse_u32(fields[1], "step")?,
            reward: parse_f64(fields[2], "reward")?,
            cum_reward: parse_f64(fields[3], "cum_reward")?,
            cum_disc_reward: parse_f64(fields[4], "cum_disc_reward")?,
            plan_ms: parse_f64(fields[5], "plan_ms")?,
            seed: fields[6]
                .parse()
                .map_err(|_| format!("line {}: bad seed {:?}", idx + 2, fields[6]))?,
        });
    }
    Ok(records)
}
