//! Minimal SVG line charts of cross-trial means.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::metrics::MetricsRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Accuracy,
    AvgVersionAge,
}

impl Series {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "accuracy" | "test_accuracy" => Ok(Series::Accuracy),
            "avg_version_age" => Ok(Series::AvgVersionAge),
            other => Err(Error::config("series", format!("unknown series `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Series::Accuracy => "test accuracy",
            Series::AvgVersionAge => "average version age",
        }
    }

    fn value(self, row: &MetricsRow) -> Option<f64> {
        match self {
            Series::Accuracy => row.metrics.test_accuracy,
            Series::AvgVersionAge => Some(row.metrics.avg_version_age),
        }
    }
}

/// One line of the chart: `(round, mean over trials)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Groups rows by policy (first-appearance order) and averages the series
/// over trials for each round. Rounds with no value are skipped.
pub fn mean_lines(rows: &[MetricsRow], series: Series) -> Vec<Line> {
    let mut order: Vec<String> = Vec::new();
    let mut sums: BTreeMap<(usize, u64), (f64, usize)> = BTreeMap::new();
    for row in rows {
        let idx = match order.iter().position(|p| *p == row.policy) {
            Some(i) => i,
            None => {
                order.push(row.policy.clone());
                order.len() - 1
            }
        };
        if let Some(v) = series.value(row) {
            let e = sums.entry((idx, row.metrics.round)).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    order
        .into_iter()
        .enumerate()
        .map(|(i, label)| Line {
            label,
            points: sums
                .range((i, 0)..=(i, u64::MAX))
                .map(|(&(_, round), &(sum, n))| (round as f64, sum / n as f64))
                .collect(),
        })
        .filter(|l| !l.points.is_empty())
        .collect()
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Roughly five round-numbered ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

pub fn render_svg(lines: &[Line], series: Series) -> Result<String> {
    let all = lines.iter().flat_map(|l| l.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    let mut any = false;
    for &(x, y) in all {
        any = true;
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !any {
        return Err(Error::NoData);
    }
    // Both series are non-negative; anchor the axis at zero.
    y0 = y0.min(0.0);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let w = &mut s;
    let fmt_err = |_| Error::Other("formatting svg".into());
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#).map_err(fmt_err)?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).map_err(fmt_err)?;
    writeln!(
        w,
        r#"<g stroke="black" stroke-width="1"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = TOP + plot_h,
        r = LEFT + plot_w
    )
    .map_err(fmt_err)?;
    for t in ticks(x0, x1) {
        let x = sx(t);
        writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b5}" stroke="black"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{label}</text>"#,
            b = TOP + plot_h,
            b5 = TOP + plot_h + 5.0,
            ty = TOP + plot_h + 20.0,
            label = tick_label(t)
        )
        .map_err(fmt_err)?;
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        writeln!(
            w,
            r##"<line x1="{l5}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#dddddd"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{label}</text>"##,
            l5 = LEFT - 5.0,
            r = LEFT + plot_w,
            tx = LEFT - 8.0,
            ty = y + 4.0,
            label = tick_label(t)
        )
        .map_err(fmt_err)?;
    }
    writeln!(
        w,
        r#"<text x="{x:.2}" y="{y}" text-anchor="middle">round</text>"#,
        x = LEFT + plot_w / 2.0,
        y = HEIGHT - 15.0
    )
    .map_err(fmt_err)?;
    writeln!(
        w,
        r#"<text x="20" y="{y:.2}" text-anchor="middle" transform="rotate(-90 20 {y:.2})">{label}</text>"#,
        y = TOP + plot_h / 2.0,
        label = series.label()
    )
    .map_err(fmt_err)?;

    for (i, line) in lines.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = line
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        )
        .map_err(fmt_err)?;
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        writeln!(
            w,
            r#"<line x1="{lx}" y1="{ly}" x2="{lx2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}">{label}</text>"#,
            lx2 = lx + 25.0,
            tx = lx + 32.0,
            ty = ly + 4.0,
            label = escape(&line.label)
        )
        .map_err(fmt_err)?;
    }
    writeln!(w, "</svg>").map_err(fmt_err)?;
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::RoundMetrics;

    fn row(trial: u64, round: u64, policy: &str, age: f64) -> MetricsRow {
        MetricsRow {
            trial,
            policy: policy.into(),
            metrics: RoundMetrics {
                round,
                test_accuracy: Some(age / 10.0),
                global_loss: None,
                avg_version_age: age,
                max_version_age: 0,
                selected: vec![],
            },
        }
    }

    #[test]
    fn lines_average_over_trials() {
        let rows = vec![
            row(0, 1, "vas", 1.0),
            row(1, 1, "vas", 3.0),
            row(0, 2, "vas", 2.0),
            row(1, 2, "vas", 2.0),
            row(0, 1, "random", 5.0),
        ];
        let lines = mean_lines(&rows, Series::AvgVersionAge);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].label, "vas");
        assert_eq!(lines[0].points, vec![(1.0, 2.0), (2.0, 2.0)]);
        assert_eq!(lines[1].points, vec![(1.0, 5.0)]);
    }

    #[test]
    fn svg_has_one_polyline_per_policy() {
        let rows = vec![row(0, 1, "vas", 1.0), row(0, 2, "vas", 2.0), row(0, 1, "random", 3.0)];
        let svg = render_svg(&mean_lines(&rows, Series::AvgVersionAge), Series::AvgVersionAge)
            .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">round</text>"));
        assert!(svg.contains(">average version age</text>"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn no_points_is_no_data() {
        assert!(matches!(render_svg(&[], Series::Accuracy), Err(Error::NoData)));
    }

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(ticks(1.0, 300.0), vec![100.0, 200.0, 300.0]);
    }
}
