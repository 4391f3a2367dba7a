use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::TrajectoryReport;

use super::config::{ConfigEcho, ExperimentConfig};
use super::verdict::Verdict;

pub const CSV_HEADER: &str = "k,algorithm,D,R1,R2,REG,W,sumE,r1_obj";

fn cell(out: &mut String, value: Option<f64>) {
    out.push(',');
    if let Some(v) = value {
        let _ = write!(out, "{v:.11e}");
    }
}

/// Writes every report as `CSV_HEADER` rows ordered by `(algorithm, k)`.
///
/// Values carry 12 significant digits; undefined entries are empty.
pub fn emit_csv(reports: &[TrajectoryReport], path: &Path) -> Result<()> {
    if reports.is_empty() || reports.iter().any(|r| r.is_empty()) {
        return Err(Error::Contract("cannot write an empty report".into()));
    }
    let mut ordered: Vec<&TrajectoryReport> = reports.iter().collect();
    ordered.sort_by_key(|r| r.algorithm);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for report in ordered {
        for row in &report.rows {
            let _ = write!(out, "{},{}", row.k, report.algorithm);
            for v in [
                Some(row.d),
                row.r1,
                row.r2,
                Some(row.reg),
                Some(row.w),
                Some(row.sum_e),
                row.r1_obj,
            ] {
                cell(&mut out, v);
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

/// Linear `k` axis and logarithmic `D` axis of the plot area.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlotScale {
    pub k_min: f64,
    pub k_max: f64,
    pub log_min: f64,
    pub log_max: f64,
}

impl PlotScale {
    pub fn fit(reports: &[TrajectoryReport]) -> Self {
        let rows = reports.iter().flat_map(|r| r.rows.iter());
        let (mut k_min, mut k_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for row in rows {
            k_min = k_min.min(row.k as f64);
            k_max = k_max.max(row.k as f64);
            if row.d > 0.0 && row.d.is_finite() {
                lo = lo.min(row.d.log10());
                hi = hi.max(row.d.log10());
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (-1.0, 0.0);
        }
        let (log_min, log_max) = (lo.floor(), hi.ceil());
        let (log_min, log_max) = if log_max > log_min {
            (log_min, log_max)
        } else {
            (log_min - 1.0, log_max + 1.0)
        };
        if k_max <= k_min {
            (k_min, k_max) = (k_min - 1.0, k_min + 1.0);
        }
        PlotScale {
            k_min,
            k_max,
            log_min,
            log_max,
        }
    }

    pub fn x(&self, k: f64) -> f64 {
        LEFT + (k - self.k_min) / (self.k_max - self.k_min) * (WIDTH - LEFT - RIGHT)
    }

    /// Nonpositive distances are pinned to the bottom edge.
    pub fn y(&self, d: f64) -> f64 {
        let t = if d > 0.0 {
            ((d.log10() - self.log_min) / (self.log_max - self.log_min)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        HEIGHT - BOTTOM - t * (HEIGHT - TOP - BOTTOM)
    }
}

/// Static SVG of `D` against `k` on a log scale, one polyline per report.
pub fn emit_plot(reports: &[TrajectoryReport], path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Contract("nothing to plot".into()));
    }
    let scale = PlotScale::fit(reports);
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    for decade in (scale.log_min as i32)..=(scale.log_max as i32) {
        let y = scale.y(10f64.powi(decade));
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{decade}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    for i in 0..=4 {
        let k = scale.k_min + (scale.k_max - scale.k_min) * i as f64 / 4.0;
        let x = scale.x(k);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            k.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">sampling time k</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">normalized distance D (log scale)</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for (i, report) in reports.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = report
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", scale.x(r.k as f64), scale.y(r.d)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-algorithm="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            report.algorithm,
            points.join(" ")
        );
        if let [row] = report.rows.as_slice() {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                scale.x(row.k as f64),
                scale.y(row.d)
            );
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 + 15.0,
            x1 + 40.0,
            x1 + 46.0,
            ly + 4.0,
            report.algorithm.name().to_uppercase()
        );
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config_hash: String,
    all_pass: bool,
    verdict: &'a Verdict,
    config: ConfigEcho,
}

pub fn write_report_json(cfg: &ExperimentConfig, verdict: &Verdict, path: &Path) -> Result<()> {
    let doc = ReportJson {
        config_hash: cfg.hash(),
        all_pass: verdict.all_pass(),
        verdict,
        config: cfg.echo(),
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
