//! On-disk datasets.
//!
//! A binary dataset is a directory holding `meta.json` plus one `<component>.bin`
//! per component, each the concatenation of `n_snapshots` frames of `nx*ny`
//! little-endian `f64` values. The CSV alternative is a directory of
//! `snap_0000.csv`, `snap_0001.csv`, ... with header `x,y,u,v`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use super::{Component, SnapshotSeries, StructuredGrid};
use crate::error::{Error, Result};

pub const META_FILE: &str = "meta.json";
const DTYPE: &str = "f64";
const LAYOUT: &str = "row-major-x-fastest";
const ENDIANNESS: &str = "little";

/// Parsed `meta.json` descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub grid: StructuredGrid,
    pub dt: f64,
    pub n_snapshots: usize,
    pub components: Vec<Component>,
    /// Free-form provenance block (generator parameters, producing command).
    pub provenance: Option<Value>,
}

impl DatasetMeta {
    pub fn to_json(&self) -> Value {
        let g = &self.grid;
        let mut obj = json!({
            "nx": g.nx(),
            "ny": g.ny(),
            "dx": g.dx(),
            "dy": g.dy(),
            "x0": g.x0(),
            "y0": g.y0(),
            "dt": self.dt,
            "n_snapshots": self.n_snapshots,
            "components": self.components.iter().map(|c| c.label()).collect::<Vec<_>>(),
            "dtype": DTYPE,
            "layout": LAYOUT,
            "endianness": ENDIANNESS,
        });
        if let Some(p) = &self.provenance {
            obj["provenance"] = p.clone();
        }
        obj
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let map = value
            .as_object()
            .ok_or_else(|| Error::format("meta.json", "descriptor is not a JSON object"))?;
        let nx = get_usize(map, "nx")?;
        let ny = get_usize(map, "ny")?;
        let dx = get_f64(map, "dx")?;
        let dy = get_f64(map, "dy")?;
        let x0 = get_f64(map, "x0")?;
        let y0 = get_f64(map, "y0")?;
        let dt = get_f64(map, "dt")?;
        let n_snapshots = get_usize(map, "n_snapshots")?;
        expect_str(map, "dtype", DTYPE)?;
        expect_str(map, "layout", LAYOUT)?;
        expect_str(map, "endianness", ENDIANNESS)?;

        let components = map
            .get("components")
            .ok_or_else(|| Error::format("components", "missing key"))?
            .as_array()
            .ok_or_else(|| Error::format("components", "expected a list of labels"))?
            .iter()
            .map(|c| {
                c.as_str()
                    .ok_or_else(|| Error::format("components", "labels must be strings"))?
                    .parse::<Component>()
                    .map_err(|e| Error::format("components", e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if components.is_empty() {
            return Err(Error::format("components", "no components listed"));
        }

        let grid = StructuredGrid::new(nx, ny, dx, dy, x0, y0)
            .map_err(|e| Error::format("nx/ny/dx/dy/x0/y0", e.to_string()))?;
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::format("dt", format!("must be positive, got {dt}")));
        }
        if n_snapshots == 0 {
            return Err(Error::format("n_snapshots", "must be at least 1"));
        }
        Ok(Self {
            grid,
            dt,
            n_snapshots,
            components,
            provenance: map.get("provenance").cloned(),
        })
    }
}

fn get_value<'a>(map: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    map.get(key)
        .ok_or_else(|| Error::format(key, "missing key"))
}

fn get_usize(map: &Map<String, Value>, key: &str) -> Result<usize> {
    get_value(map, key)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::format(key, "expected a non-negative integer"))
}

fn get_f64(map: &Map<String, Value>, key: &str) -> Result<f64> {
    get_value(map, key)?
        .as_f64()
        .ok_or_else(|| Error::format(key, "expected a number"))
}

fn expect_str(map: &Map<String, Value>, key: &str, expected: &str) -> Result<()> {
    let v = get_value(map, key)?
        .as_str()
        .ok_or_else(|| Error::format(key, "expected a string"))?;
    if v != expected {
        return Err(Error::format(
            key,
            format!("unsupported value `{v}` (only `{expected}`)"),
        ));
    }
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::format("meta.json", format!("invalid JSON: {e}")))?;
    DatasetMeta::from_json(&value)
}

pub(crate) fn write_meta(dir: &Path, meta: &DatasetMeta) -> Result<()> {
    let path = dir.join(META_FILE);
    let mut text = serde_json::to_string_pretty(&meta.to_json()).expect("meta serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn bin_path(dir: &Path, component: Component) -> PathBuf {
    dir.join(format!("{}.bin", component.label()))
}

/// Loads one component of a dataset directory.
///
/// Binary datasets are recognised by their `meta.json`. Directories of
/// `snap_*.csv` files carry no time step, so they must be read through
/// [`load_series_csv`].
pub fn load_series(dir: &Path, component: Component) -> Result<SnapshotSeries> {
    if dir.join(META_FILE).exists() {
        return load_binary(dir, component);
    }
    if dir.join(csv_name(0)).exists() {
        return Err(Error::format(
            "dt",
            "CSV datasets carry no time step; load them with an explicit dt",
        ));
    }
    let path = dir.join(META_FILE);
    Err(Error::io(
        &path,
        std::io::Error::new(std::io::ErrorKind::NotFound, "no dataset descriptor"),
    ))
}

fn load_binary(dir: &Path, component: Component) -> Result<SnapshotSeries> {
    let meta = read_meta(dir)?;
    if !meta.components.contains(&component) {
        return Err(Error::format(
            "components",
            format!("dataset has no `{}` component", component.label()),
        ));
    }
    let path = bin_path(dir, component);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let n = meta.grid.n_points();
    let name = path.file_name().unwrap_or_default().to_string_lossy();
    if bytes.len() % (8 * n) != 0 {
        return Err(Error::dimension(
            format!("values in {name}"),
            n * meta.n_snapshots,
            bytes.len() / 8,
        ));
    }
    let frames = bytes.len() / (8 * n);
    if frames != meta.n_snapshots {
        return Err(Error::dimension(
            format!("frames in {name}"),
            meta.n_snapshots,
            frames,
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let data = DMatrix::from_iterator(n, frames, values);
    SnapshotSeries::new(meta.grid, component, meta.dt, data)
}

fn encode_frames(series: &SnapshotSeries) -> Vec<u8> {
    let mut buf = Vec::with_capacity(series.data().len() * 8);
    for v in series.data().as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Writes a single-component dataset.
pub fn save_series(series: &SnapshotSeries, dir: &Path) -> Result<()> {
    save_dataset(&[series], dir, None)
}

/// Writes several components sharing one grid, time step and snapshot count.
pub fn save_dataset(
    series: &[&SnapshotSeries],
    dir: &Path,
    provenance: Option<&Value>,
) -> Result<()> {
    let first = series
        .first()
        .ok_or_else(|| Error::Argument("no series to save".into()))?;
    for s in &series[1..] {
        if s.grid() != first.grid() || s.dt() != first.dt() {
            return Err(Error::Argument(
                "components of one dataset must share grid and dt".into(),
            ));
        }
        if s.n_snapshots() != first.n_snapshots() {
            return Err(Error::dimension(
                "snapshots per component",
                first.n_snapshots(),
                s.n_snapshots(),
            ));
        }
    }
    let mut components: Vec<Component> = series.iter().map(|s| s.component()).collect();
    components.dedup();
    if components.len() != series.len() {
        return Err(Error::Argument("duplicate component in dataset".into()));
    }

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in series {
        let path = bin_path(dir, s.component());
        fs::write(&path, encode_frames(s)).map_err(|e| Error::io(&path, e))?;
    }
    write_meta(
        dir,
        &DatasetMeta {
            grid: *first.grid(),
            dt: first.dt(),
            n_snapshots: first.n_snapshots(),
            components,
            provenance: provenance.cloned(),
        },
    )
}

fn csv_name(index: usize) -> String {
    format!("snap_{index:04}.csv")
}

/// Loads one component from a `snap_*.csv` directory.
pub fn load_series_csv(dir: &Path, component: Component, dt: f64) -> Result<SnapshotSeries> {
    let (u, v) = load_csv_dataset(dir, dt)?;
    Ok(match component {
        Component::Streamwise => u,
        Component::Transversal => v,
    })
}

/// Loads both components from a `snap_*.csv` directory, inferring the grid from
/// the first file and checking every file against it.
pub fn load_csv_dataset(dir: &Path, dt: f64) -> Result<(SnapshotSeries, SnapshotSeries)> {
    let mut files = Vec::new();
    while dir.join(csv_name(files.len())).exists() {
        files.push(dir.join(csv_name(files.len())));
    }
    if files.is_empty() {
        return Err(Error::io(
            dir.join(csv_name(0)),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no CSV snapshots"),
        ));
    }

    let first = read_csv_rows(&files[0])?;
    let grid = infer_grid(&first, &files[0])?;
    let n = grid.n_points();
    let mut u = DMatrix::zeros(n, files.len());
    let mut v = DMatrix::zeros(n, files.len());
    for (t, path) in files.iter().enumerate() {
        let rows = if t == 0 {
            first.clone()
        } else {
            read_csv_rows(path)?
        };
        if rows.len() != n {
            return Err(Error::dimension(
                format!("rows in {}", path.display()),
                n,
                rows.len(),
            ));
        }
        let mut seen = vec![false; n];
        for row in &rows {
            let p = locate(&grid, row.x, row.y).ok_or_else(|| {
                Error::format(
                    path.display().to_string(),
                    format!("point ({}, {}) is off the inferred grid", row.x, row.y),
                )
            })?;
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::format(
                    path.display().to_string(),
                    format!("duplicate point ({}, {})", row.x, row.y),
                ));
            }
            if !row.u.is_finite() || !row.v.is_finite() {
                return Err(Error::NonFinite {
                    snapshot: t,
                    point: p,
                });
            }
            u[(p, t)] = row.u;
            v[(p, t)] = row.v;
        }
    }
    Ok((
        SnapshotSeries::new(grid, Component::Streamwise, dt, u)?,
        SnapshotSeries::new(grid, Component::Transversal, dt, v)?,
    ))
}

#[derive(Debug, Clone, Copy)]
struct CsvRow {
    x: f64,
    y: f64,
    u: f64,
    v: f64,
}

fn read_csv_rows(path: &Path) -> Result<Vec<CsvRow>> {
    let key = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::format(format!("{key}: {name}"), "missing CSV column"))
    };
    let (ix, iy, iu, iv) = (column("x")?, column("y")?, column("u")?, column("v")?);

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.trim().parse::<f64>().map_err(|_| {
                Error::format(
                    format!("{key}: {name}"),
                    format!("row {}: cannot parse `{raw}`", line + 1),
                )
            })
        };
        rows.push(CsvRow {
            x: field(ix, "x")?,
            y: field(iy, "y")?,
            u: field(iu, "u")?,
            v: field(iv, "v")?,
        });
    }
    Ok(rows)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path.display().to_string(), e.to_string())
    }
}

/// Distinct coordinates along one axis, merged within a relative tolerance.
fn distinct_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let span = values.last().unwrap_or(&0.0) - values.first().unwrap_or(&0.0);
    let merge = 1e-12 * span.abs().max(1.0);
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        match out.last() {
            Some(&last) if (v - last).abs() <= merge => {}
            _ => out.push(v),
        }
    }
    out
}

/// Origin and spacing of a uniform axis, checked to `1e-9 * spacing`.
fn uniform_axis(coords: &[f64], axis: &str, path: &Path) -> Result<(f64, f64)> {
    let origin = coords[0];
    if coords.len() == 1 {
        return Ok((origin, 1.0));
    }
    let step = (coords[coords.len() - 1] - origin) / (coords.len() - 1) as f64;
    let tol = 1e-9 * step;
    for (k, &c) in coords.iter().enumerate() {
        if (c - (origin + k as f64 * step)).abs() > tol {
            return Err(Error::format(
                format!("{}: {axis}", path.display()),
                format!("non-uniform grid: coordinate {c} deviates from uniform spacing {step}"),
            ));
        }
    }
    Ok((origin, step))
}

fn infer_grid(rows: &[CsvRow], path: &Path) -> Result<StructuredGrid> {
    if rows.is_empty() {
        return Err(Error::format(path.display().to_string(), "no data rows"));
    }
    let xs = distinct_sorted(rows.iter().map(|r| r.x).collect());
    let ys = distinct_sorted(rows.iter().map(|r| r.y).collect());
    let (x0, dx) = uniform_axis(&xs, "x", path)?;
    let (y0, dy) = uniform_axis(&ys, "y", path)?;
    let grid = StructuredGrid::new(xs.len(), ys.len(), dx, dy, x0, y0)?;
    if grid.n_points() != rows.len() {
        return Err(Error::dimension(
            format!("rows in {} (nx*ny)", path.display()),
            grid.n_points(),
            rows.len(),
        ));
    }
    Ok(grid)
}

fn locate(grid: &StructuredGrid, x: f64, y: f64) -> Option<usize> {
    let snap = |c: f64, origin: f64, step: f64, n: usize| -> Option<usize> {
        let f = (c - origin) / step;
        let k = f.round();
        if k < 0.0 || k >= n as f64 || (f - k).abs() * step > 1e-9 * step {
            return None;
        }
        Some(k as usize)
    };
    let i = snap(x, grid.x0(), grid.dx(), grid.nx())?;
    let j = snap(y, grid.y0(), grid.dy(), grid.ny())?;
    Some(grid.index(i, j))
}

/// Writes a dataset as `snap_*.csv` files (header `x,y,u,v`).
pub fn save_csv_dataset(u: &SnapshotSeries, v: &SnapshotSeries, dir: &Path) -> Result<()> {
    if u.grid() != v.grid() || u.n_snapshots() != v.n_snapshots() {
        return Err(Error::Argument(
            "u and v must share grid and snapshot count".into(),
        ));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = u.grid();
    for t in 0..u.n_snapshots() {
        let path = dir.join(csv_name(t));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        w.write_record(["x", "y", "u", "v"])
            .map_err(|e| csv_error(&path, e))?;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let p = g.index(i, j);
                w.write_record([
                    g.x(i).to_string(),
                    g.y(j).to_string(),
                    u.frame(t)[p].to_string(),
                    v.frame(t)[p].to_string(),
                ])
                .map_err(|e| csv_error(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
