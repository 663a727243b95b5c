//! Per-round metrics as CSV.
//!
//! ```text
//! # vaoi-fl metrics v1
//! trial,round,policy,test_accuracy,global_loss,avg_version_age,max_version_age,selected_ids
//! 0,1,vas,0.4125,1.98305117,0.27,1,3;17;42
//! ```
//!
//! Reals carry 9 significant digits; a metric not evaluated that round is an
//! empty cell.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::orchestrator::RoundMetrics;

pub const VERSION_LINE: &str = "# vaoi-fl metrics v1";
pub const HEADER: [&str; 8] = [
    "trial",
    "round",
    "policy",
    "test_accuracy",
    "global_loss",
    "avg_version_age",
    "max_version_age",
    "selected_ids",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub trial: u64,
    pub policy: String,
    pub metrics: RoundMetrics,
}

/// `%.9g`-style rendering: 9 significant digits, trailing zeros dropped.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_default()
}

pub fn render(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(VERSION_LINE);
    out.push('\n');
    out.push_str(&HEADER.join(","));
    out.push('\n');
    for row in rows {
        let m = &row.metrics;
        let selected: Vec<String> = m.selected.iter().map(|i| i.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.trial,
            m.round,
            row.policy,
            opt(m.test_accuracy),
            opt(m.global_loss),
            format_sig9(m.avg_version_age),
            m.max_version_age,
            selected.join(";"),
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_metrics(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse(path: &Path, text: &str) -> Result<Vec<MetricsRow>> {
    let bad = |line: u64, column: &str, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(VERSION_LINE) {
        return Err(bad(1, "", format!("expected `{VERSION_LINE}`")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.split_once('\n').map_or("", |(_, rest)| rest).as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| bad(2, "", e.to_string()))?
        .clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(bad(2, "", "unexpected header row".into()));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(0, "", e.to_string()))?;
        // +1 for the version line that was stripped before parsing.
        let line = record.position().map_or(0, |p| p.line()) + 1;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            cell(i)
                .parse()
                .map_err(|_| bad(line, HEADER[i], format!("`{}` is not a number", cell(i))))
        };
        let int = |i: usize| -> Result<u64> {
            cell(i)
                .parse()
                .map_err(|_| bad(line, HEADER[i], format!("`{}` is not an integer", cell(i))))
        };
        let maybe = |i: usize| -> Result<Option<f64>> {
            if cell(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let selected = if cell(7).is_empty() {
            Vec::new()
        } else {
            cell(7)
                .split(';')
                .map(|s| {
                    s.parse()
                        .map_err(|_| bad(line, HEADER[7], format!("`{s}` is not a client id")))
                })
                .collect::<Result<_>>()?
        };
        rows.push(MetricsRow {
            trial: int(0)?,
            policy: cell(2).to_string(),
            metrics: RoundMetrics {
                round: int(1)?,
                test_accuracy: maybe(3)?,
                global_loss: maybe(4)?,
                avg_version_age: num(5)?,
                max_version_age: int(6)?,
                selected,
            },
        });
    }
    Ok(rows)
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(path, &text)
}
