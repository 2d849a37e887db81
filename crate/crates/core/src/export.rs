//! Writers for decomposition, profile and comparison artifacts (CSV, JSON and
//! minimal SVG line charts).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::{csv_error, save_dataset, Component, SnapshotSeries, StructuredGrid};
use crate::metrics::StationProfile;
use crate::pod::{cumulative_energy, PodResult};

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// `mode_index,sigma,energy_fraction,cumulative_energy`, one row per retained mode.
pub fn write_spectrum_csv(result: &PodResult, path: &Path) -> Result<()> {
    let cumulative = cumulative_energy(result);
    write_rows(
        path,
        &strings(&[
            "mode_index",
            "sigma",
            "energy_fraction",
            "cumulative_energy",
        ]),
        (0..result.rank()).map(|k| {
            [
                (k + 1).to_string(),
                result.singular_values()[k].to_string(),
                result.energy_fractions()[k].to_string(),
                cumulative[k].to_string(),
            ]
        }),
    )
}

/// `mode_index,cumulative_energy`.
pub fn write_cumulative_csv(result: &PodResult, path: &Path) -> Result<()> {
    let cumulative = cumulative_energy(result);
    write_rows(
        path,
        &strings(&["mode_index", "cumulative_energy"]),
        cumulative
            .iter()
            .enumerate()
            .map(|(k, c)| [(k + 1).to_string(), c.to_string()]),
    )
}

/// `time,mode_1,...,mode_r`, one row per snapshot.
pub fn write_coefficients_csv(result: &PodResult, dt: f64, path: &Path) -> Result<()> {
    let mut header = vec!["time".to_string()];
    header.extend((1..=result.rank()).map(|k| format!("mode_{k}")));
    let c = result.coefficients();
    write_rows(
        path,
        &header,
        (0..result.n_snapshots()).map(|t| {
            std::iter::once((t as f64 * dt).to_string())
                .chain((0..result.rank()).map(move |k| c[(k, t)].to_string()))
        }),
    )
}

/// `y_over_D,mean_velocity`.
pub fn write_profile_csv(profile: &StationProfile, path: &Path) -> Result<()> {
    write_rows(
        path,
        &strings(&["y_over_D", "mean_velocity"]),
        profile
            .y_over_d
            .iter()
            .zip(&profile.mean_velocity)
            .map(|(y, u)| [y.to_string(), u.to_string()]),
    )
}

/// MAC matrix with a leading `mode_a` column and one column per mode of `b`.
pub fn write_mac_csv(mac: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut header = vec!["mode_a".to_string()];
    header.extend((1..=mac.ncols()).map(|j| format!("b_{j}")));
    write_rows(
        path,
        &header,
        mac.row_iter().enumerate().map(|(i, row)| {
            std::iter::once((i + 1).to_string())
                .chain(row.iter().map(|v| v.to_string()).collect::<Vec<_>>())
        }),
    )
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Stores spatial modes as a dataset whose frames are the modes in order.
///
/// A vector decomposition (2n rows on an n-point grid) is split into its `u`
/// and `v` halves; otherwise the modes are stored under `component`.
pub fn write_modes(
    result: &PodResult,
    grid: &StructuredGrid,
    component: Option<Component>,
    dir: &Path,
    provenance: Option<&Value>,
) -> Result<()> {
    let n = grid.n_points();
    let modes = result.modes();
    if result.rank() == 0 {
        return Err(Error::Argument("no modes to write".into()));
    }
    match component {
        Some(c) => {
            if modes.nrows() != n {
                return Err(Error::dimension("rows per mode", n, modes.nrows()));
            }
            let s = SnapshotSeries::new(*grid, c, 1.0, modes.clone())?;
            save_dataset(&[&s], dir, provenance)
        }
        None => {
            if modes.nrows() != 2 * n {
                return Err(Error::dimension(
                    "rows per vector mode",
                    2 * n,
                    modes.nrows(),
                ));
            }
            let u = SnapshotSeries::new(
                *grid,
                Component::Streamwise,
                1.0,
                modes.rows(0, n).into_owned(),
            )?;
            let v = SnapshotSeries::new(
                *grid,
                Component::Transversal,
                1.0,
                modes.rows(n, n).into_owned(),
            )?;
            save_dataset(&[&u, &v], dir, provenance)
        }
    }
}

/// One named polyline of a chart.
pub struct Curve<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// A bare line chart: frame, axis extents, labels and one polyline per curve.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, curves: &[Curve<'_>]) -> String {
    let (w, h, pad) = (640.0, 420.0, 60.0);
    let all = curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (value, x, anchor) in [(x0, pad, "start"), (x1, w - pad, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}">{}</text>"#,
            h - pad + 16.0,
            tick(value)
        );
    }
    for (value, y) in [(y0, h - pad), (y1, pad + 10.0)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#,
            pad - 6.0,
            tick(value)
        );
    }
    for (k, curve) in curves.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = pad + 18.0 + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" text-anchor="end" fill="{colour}">{}</text>"#,
            w - pad - 8.0,
            escape(curve.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn write_svg(svg: &str, path: &Path) -> Result<()> {
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Cumulative energy against mode number.
pub fn cumulative_energy_curve(result: &PodResult) -> Vec<(f64, f64)> {
    cumulative_energy(result)
        .into_iter()
        .enumerate()
        .map(|(k, c)| ((k + 1) as f64, c))
        .collect()
}
