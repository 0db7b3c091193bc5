//! Per-iteration history CSV.
//!
//! Columns, in this fixed order:
//! `iter,objective,lagrangian,primal_residual,step_norm_sq,u_k,descent_lhs,descent_rhs,dual_identity_err,wall_time_ms`.
//! Floats use Rust's shortest round-trip representation, so rereading a
//! file reproduces every value bit for bit. Lines end in `\n`.

use std::fs;
use std::io::Write;
use std::path::Path;

use miadmm::diagnostics::IterationRecord;
use miadmm::{Error, Result};

pub const HISTORY_HEADER: &str =
    "iter,objective,lagrangian,primal_residual,step_norm_sq,u_k,descent_lhs,descent_rhs,dual_identity_err,wall_time_ms";

/// One parsed CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    /// The nine float columns after `iter`, in header order.
    pub values: [f64; 9],
}

impl From<&IterationRecord> for HistoryRow {
    fn from(r: &IterationRecord) -> Self {
        HistoryRow {
            iter: r.k,
            values: [
                r.objective,
                r.lagrangian,
                r.primal_residual,
                r.step_norm_sq,
                r.u_k,
                r.descent_lhs,
                r.descent_rhs,
                r.dual_identity_err,
                r.wall_time_ms,
            ],
        }
    }
}

pub fn format_history_csv(history: &[IterationRecord]) -> String {
    let mut s = String::with_capacity(64 * (history.len() + 1));
    s.push_str(HISTORY_HEADER);
    s.push('\n');
    for r in history {
        let row = HistoryRow::from(r);
        s.push_str(&row.iter.to_string());
        for v in row.values {
            // Debug is the shortest representation that parses back exactly
            // and switches to exponent form for tiny and huge magnitudes.
            s.push(',');
            s.push_str(&format!("{v:?}"));
        }
        s.push('\n');
    }
    s
}

/// Fails without touching `path` when `history` is empty.
pub fn write_history_csv(history: &[IterationRecord], path: impl AsRef<Path>) -> Result<()> {
    if history.is_empty() {
        return Err(Error::InvalidConfig("refusing to write an empty history".into()));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(format_history_csv(history).as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn parse_history_csv(text: &str) -> Result<Vec<HistoryRow>> {
    let mut lines = text.split_terminator('\n');
    match lines.next() {
        Some(HISTORY_HEADER) => {}
        other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::Parse(format!("row {}: {what}", i + 1));
            let mut cells = line.split(',');
            let iter = cells
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad("bad iteration"))?;
            let mut values = [0.0; 9];
            for v in values.iter_mut() {
                *v = cells
                    .next()
                    .ok_or_else(|| bad("too few columns"))?
                    .parse()
                    .map_err(|_| bad("bad number"))?;
            }
            if cells.next().is_some() {
                return Err(bad("too many columns"));
            }
            Ok(HistoryRow { iter, values })
        })
        .collect()
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<Vec<HistoryRow>> {
    parse_history_csv(&fs::read_to_string(path)?)
}
