//! Writes a finished [`Report`] as JSON, CSV tables and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::CliError;
use crate::report::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
    pub svg: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self {
            json: true,
            csv: true,
            svg: false,
        }
    }
}

impl Formats {
    /// Parses a comma-separated list such as `json,csv,svg`.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let mut f = Formats {
            json: false,
            csv: false,
            svg: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "json" => f.json = true,
                "csv" => f.csv = true,
                "svg" => f.svg = true,
                other => return Err(CliError::Config(format!("unknown output format {other:?}"))),
            }
        }
        if !(f.json || f.csv || f.svg) {
            return Err(CliError::Config("no output format selected".into()));
        }
        Ok(f)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Io(io),
        other => CliError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn plot_files(report: &Report) -> Vec<&'static str> {
    let mut files = Vec::new();
    if report.evolution.is_some() {
        files.push("snapshots.svg");
    }
    if !report.desch_sweep.is_empty() {
        files.push("desch_curve.svg");
    }
    files
}

/// Writes every requested format into `dir` and returns the file names.
/// `report.plots` is filled in before anything is written.
pub fn write_outputs(report: &mut Report, dir: &Path, formats: Formats) -> Result<Vec<String>, CliError> {
    let plots = if formats.svg { plot_files(report) } else { Vec::new() };
    report.plots = if plots.is_empty() {
        "none".into()
    } else {
        plots.join(",")
    };
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if formats.json {
        let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        text.push('\n');
        fs::write(dir.join("report.json"), text)?;
        written.push("report.json".to_string());
    }
    if formats.csv {
        written.extend(write_csvs(report, dir)?);
    }
    if formats.svg {
        if let Some(ev) = &report.evolution {
            let series: Vec<(String, Vec<(f64, f64)>)> = ev
                .snapshots
                .iter()
                .map(|s| {
                    (
                        format!("t = {}", s.time),
                        s.x.iter().copied().zip(s.values.iter().copied()).collect(),
                    )
                })
                .collect();
            fs::write(
                dir.join("snapshots.svg"),
                svg_plot("solution snapshots", "x", &series, None),
            )?;
            written.push("snapshots.svg".into());
        }
        if !report.desch_sweep.is_empty() {
            let k = report.desch_sweep.iter().map(|d| (d.lambda, d.k)).collect();
            let spr = report.desch_sweep.iter().map(|d| (d.lambda, d.spr)).collect();
            let series = vec![("K".to_string(), k), ("spr".to_string(), spr)];
            fs::write(
                dir.join("desch_curve.svg"),
                svg_plot("K and spr against lambda", "lambda", &series, Some(1.0)),
            )?;
            written.push("desch_curve.svg".into());
        }
    }
    Ok(written)
}

fn write_csvs(report: &Report, dir: &Path) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();
    if let Some(ev) = &report.evolution {
        let per_time = report.settings.probes.len().max(1);
        let last_term = ev.terms_kept.saturating_sub(1);
        let rows = ev.probes.iter().enumerate().map(|(i, p)| {
            let tail = ev.tail_bounds.get(i / per_time).copied().unwrap_or(ev.tail_bound);
            vec![num(p.time), num(p.x), num(p.value), last_term.to_string(), num(tail)]
        });
        write_table(
            &dir.join("evolution.csv"),
            &["time", "probe_x", "value", "term_index_max", "tail_bound"],
            rows,
        )?;
        let rows = ev
            .term_norms
            .iter()
            .enumerate()
            .map(|(k, v)| vec![k.to_string(), num(*v)]);
        write_table(&dir.join("term_norms.csv"), &["term_index", "norm"], rows)?;
        written.extend(["evolution.csv".to_string(), "term_norms.csv".to_string()]);
    }
    if let Some(o) = &report.oracle {
        let rows = o.times.iter().zip(&o.errors).map(|(t, e)| vec![num(*t), num(*e)]);
        write_table(&dir.join("oracle_errors.csv"), &["time", "sup_error"], rows)?;
        written.push("oracle_errors.csv".into());
    }
    let rows = report.desch_sweep.iter().map(|d| {
        vec![
            num(d.lambda),
            num(d.k),
            num(d.spr),
            num(d.spr_power),
            d.norm_condition_met.to_string(),
            d.spr_condition_met.to_string(),
        ]
    });
    write_table(
        &dir.join("desch_sweep.csv"),
        &[
            "lambda",
            "k",
            "spr",
            "spr_power",
            "norm_condition_met",
            "spr_condition_met",
        ],
        rows,
    )?;
    let rows = report
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), c.passed.to_string(), num(c.value), num(c.threshold)]);
    write_table(&dir.join("checks.csv"), &["name", "passed", "value", "threshold"], rows)?;
    written.extend(["desch_sweep.csv".to_string(), "checks.csv".to_string()]);
    Ok(written)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// A minimal line plot; `reference` draws a dashed horizontal line.
fn svg_plot(title: &str, xlabel: &str, series: &[(String, Vec<(f64, f64)>)], reference: Option<f64>) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let pts = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if let Some(r) = reference {
        y0 = y0.min(r);
        y1 = y1.max(r);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        out,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#,
        w / 2.0,
        h - 10.0
    );
    for (x, y, label, anchor) in [
        (m, h - m + 16.0, x0, "start"),
        (w - m, h - m + 16.0, x1, "end"),
        (m - 4.0, h - m, y0, "end"),
        (m - 4.0, m + 4.0, y1, "end"),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{label:.3}</text>"#
        );
    }
    if let Some(r) = reference {
        let _ = writeln!(
            out,
            r#"<line x1="{m}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="gray" stroke-dasharray="4 4"/>"#,
            w - m,
            y = sy(r)
        );
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name}</text>"#,
            w - m - 90.0,
            m + 14.0 * (i as f64 + 1.0)
        );
    }
    out.push_str("</svg>\n");
    out
}
