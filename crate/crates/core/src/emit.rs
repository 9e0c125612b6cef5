//! CSV, JSON and SVG output.
//!
//! Numbers in CSV files are written with 17 significant digits so that
//! parsing them back gives the same `f64` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::ScanTrace;
use crate::error::{Error, Result};
use crate::steady::{BranchDiagram, InstabilityMap, Stability};
use crate::zeeman::PumpTrajectory;

pub const TRACE_COLUMNS: [&str; 5] = ["t", "P_out", "I", "p", "phi_cav"];

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn trace_csv(trace: &ScanTrace) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push('\n');
    for k in 0..trace.len() {
        let row = [
            trace.times[k],
            trace.output_power[k],
            trace.intensity[k],
            trace.orientation[k],
            trace.phi_cav[k],
        ];
        out.push_str(&join(row));
        out.push('\n');
    }
    out
}

/// Columns `t, N`, followed by the 20 sublevel populations when present.
pub fn pump_csv(trajectory: &PumpTrajectory) -> String {
    let mut header = vec!["t".to_string(), "N".to_string()];
    if trajectory.populations.is_some() {
        header.extend((-4..=4).map(|m| format!("g{m:+}")));
        header.extend((-5..=5).map(|m| format!("e{m:+}")));
    }
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..trajectory.times.len() {
        let mut row = vec![trajectory.times[k], trajectory.stretched[k]];
        if let Some(pops) = &trajectory.populations {
            row.extend(pops[k].ground);
            row.extend(pops[k].excited);
        }
        out.push_str(&join(row));
        out.push('\n');
    }
    out
}

/// One row per `Φ₀`: root count, then intensity, orientation and class of
/// every steady state (blank where a row has fewer roots).
pub fn branch_csv(diagram: &BranchDiagram) -> String {
    let width = diagram.branches.iter().map(Vec::len).max().unwrap_or(0);
    let mut header = vec!["phi0".to_string(), "n_roots".to_string()];
    for k in 1..=width {
        header.extend([format!("I_{k}"), format!("p_{k}"), format!("class_{k}")]);
    }
    let mut out = header.join(",");
    out.push('\n');
    for (phi0, points) in diagram.phi0_grid.iter().zip(&diagram.branches) {
        let mut cells = vec![fmt_f64(*phi0), points.len().to_string()];
        for k in 0..width {
            match points.get(k) {
                Some(p) => cells.extend([fmt_f64(p.intensity), fmt_f64(p.orientation), p.stability.label().to_string()]),
                None => cells.extend([String::new(), String::new(), String::new()]),
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// One row per cell: `phi0, drive, n_roots, class_1, ...`. Failed cells have
/// `n_roots = NA` and `class_1 = failed`.
pub fn map_csv(map: &InstabilityMap) -> String {
    let width = map.cells.iter().filter_map(|c| c.n_roots()).max().unwrap_or(0).max(1);
    let mut header = vec!["phi0".to_string(), "drive".to_string(), "n_roots".to_string()];
    header.extend((1..=width).map(|k| format!("class_{k}")));
    let mut out = header.join(",");
    out.push('\n');
    for cell in &map.cells {
        let mut cells = vec![fmt_f64(cell.phi0), fmt_f64(cell.drive)];
        match &cell.classes {
            Ok(classes) => {
                cells.push(classes.len().to_string());
                cells.extend((0..width).map(|k| classes.get(k).map(|s| s.label().to_string()).unwrap_or_default()));
            }
            Err(_) => {
                cells.push("NA".into());
                cells.push("failed".into());
                cells.extend((1..width).map(|_| String::new()));
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_csv(contents: &str, path: &Path) -> Result<()> {
    write(path, contents)
}

pub fn emit_trace_csv(trace: &ScanTrace, path: &Path) -> Result<()> {
    write(path, &trace_csv(trace))
}

/// Pretty JSON; keys follow struct declaration order.
pub fn emit_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

/// Parses a numeric CSV written by this module (header skipped).
pub fn parse_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().map_err(|e| Error::invalid("csv", format!("`{v}`: {e}"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

/// A labelled polyline for [`svg_lines`].
pub struct Series<'a> {
    pub label: String,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn axes(svg: &mut String, x: (f64, f64), y: (f64, f64), xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = MARGIN;
    let (w, h) = (WIDTH - l - r, HEIGHT - t - b);
    let _ = writeln!(svg, r##"<rect x="{l}" y="{t}" width="{w}" height="{h}" fill="none" stroke="#000"/>"##);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x.0 + f * (x.1 - x.0);
        let yv = y.0 + f * (y.1 - y.0);
        let px = l + f * w;
        let py = t + h - f * h;
        let _ = writeln!(svg, r#"<text x="{px:.1}" y="{:.1}" font-size="11" text-anchor="middle">{xv:.4}</text>"#, t + h + 16.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{yv:.4}</text>"#, l - 4.0, py + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{xlabel}</text>"#, l + w / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.1})">{ylabel}</text>"#,
        t + h / 2.0,
        t + h / 2.0
    );
}

fn open_svg() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
    )
}

/// Line plot of one or more series sharing axes.
pub fn svg_lines(series: &[Series<'_>], xlabel: &str, ylabel: &str) -> String {
    let x = bounds(series.iter().flat_map(|s| s.x.iter().copied()));
    let y = bounds(series.iter().flat_map(|s| s.y.iter().copied()));
    let (l, r, t, b) = MARGIN;
    let (w, h) = (WIDTH - l - r, HEIGHT - t - b);
    let mut svg = open_svg();
    axes(&mut svg, x, y, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        // thin long series to about two points per pixel
        let stride = (s.x.len() / (2 * w as usize)).max(1);
        let mut points = String::new();
        for i in (0..s.x.len()).step_by(stride) {
            let px = l + (s.x[i] - x.0) / (x.1 - x.0) * w;
            let py = t + h - (s.y[i] - y.0) / (y.1 - y.0) * h;
            let _ = write!(points, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#, points.trim_end());
        if series.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{colour}">{}</text>"#,
                l + w - 90.0,
                t + 14.0 + 13.0 * k as f64,
                s.label
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Unconnected points, for curves that fold back on themselves.
pub fn svg_scatter(xs: &[f64], ys: &[f64], xlabel: &str, ylabel: &str) -> String {
    let x = bounds(xs.iter().copied());
    let y = bounds(ys.iter().copied());
    let (l, r, t, b) = MARGIN;
    let (w, h) = (WIDTH - l - r, HEIGHT - t - b);
    let mut svg = open_svg();
    axes(&mut svg, x, y, xlabel, ylabel);
    for (xv, yv) in xs.iter().zip(ys) {
        let px = l + (xv - x.0) / (x.1 - x.0) * w;
        let py = t + h - (yv - y.0) / (y.1 - y.0) * h;
        let _ = writeln!(svg, r#"<circle cx="{px:.2}" cy="{py:.2}" r="1.2" fill="{}"/>"#, PALETTE[0]);
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn trace_svg(trace: &ScanTrace) -> String {
    svg_lines(
        &[Series {
            label: "P_out".into(),
            x: &trace.times,
            y: &trace.output_power,
        }],
        "t (1/Γ)",
        "P_out (γ_out·I)",
    )
}

pub fn class_colour(class: Option<Stability>) -> &'static str {
    match class {
        Some(Stability::StableNode) => "#c6dbef",
        Some(Stability::StableFocus) => "#6baed6",
        Some(Stability::Saddle) => "#fdae6b",
        Some(Stability::UnstableFocus) => "#d62728",
        Some(Stability::UnstableNode) => "#756bb1",
        None => "#000000",
    }
}

/// Raster of the instability map. Each cell shows its most unstable class;
/// cells with no stable state and an unstable focus are outlined.
pub fn map_svg(map: &InstabilityMap) -> String {
    let x = bounds(map.phi0_axis.iter().copied());
    let y = bounds(map.drive_axis.iter().copied());
    let (l, r, t, b) = MARGIN;
    let (w, h) = (WIDTH - l - r, HEIGHT - t - b);
    let (nx, ny) = (map.phi0_axis.len(), map.drive_axis.len());
    let (cw, ch) = (w / nx as f64, h / ny as f64);
    let mut svg = open_svg();
    for (j, _) in map.drive_axis.iter().enumerate() {
        for (i, cell) in map.row(j).iter().enumerate() {
            let worst = cell.classes.as_ref().ok().and_then(|c| {
                c.iter().copied().max_by_key(|s| match s {
                    Stability::StableNode => 0,
                    Stability::StableFocus => 1,
                    Stability::Saddle => 2,
                    Stability::UnstableNode => 3,
                    Stability::UnstableFocus => 4,
                })
            });
            let stroke = if cell.is_self_pulsing() { r##" stroke="#000" stroke-width="0.5""## } else { "" };
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"{stroke}/>"#,
                l + i as f64 * cw,
                t + h - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                class_colour(worst)
            );
        }
    }
    axes(&mut svg, x, y, "Φ₀ (rad)", "drive");
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_svg(contents: &str, path: &Path) -> Result<()> {
    write(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(trace_csv(&ScanTrace::default()), "t,P_out,I,p,phi_cav\n");
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -1e-300, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 2.0];
        let svg = svg_lines(&[Series { label: "a".into(), x: &x, y: &y }], "t", "P");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
