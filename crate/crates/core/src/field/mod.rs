//! Gridded velocity snapshots: grid geometry, the snapshot series container,
//! the rectangular analysis box and time-mean handling.
//!
//! Storage follows the snapshot-matrix layout used throughout the crate: one
//! column per snapshot (time-ordered), one row per grid point, with grid points
//! enumerated row-major with `x` varying fastest.

mod io;
pub(crate) use io::csv_error;

pub use io::{
    load_csv_dataset, load_series, load_series_csv, read_meta, save_csv_dataset, save_dataset,
    save_series, DatasetMeta, META_FILE,
};

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform 2D Cartesian grid. Point `(i, j)` sits at `(x0 + i*dx, y0 + j*dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredGrid {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    x0: f64,
    y0: f64,
}

impl StructuredGrid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Argument(format!(
                "grid needs at least one point per axis, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) || !(dy > 0.0 && dy.is_finite()) {
            return Err(Error::Argument(format!(
                "grid spacing must be positive and finite, got dx={dx}, dy={dy}"
            )));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::Argument("grid origin must be finite".into()));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            x0,
            y0,
        })
    }

    /// Grid covering `[x0, x0 + lx] x [y0, y0 + ly]` with `nx x ny` points.
    pub fn spanning(nx: usize, ny: usize, x0: f64, lx: f64, y0: f64, ly: f64) -> Result<Self> {
        let dx = if nx > 1 {
            lx / (nx - 1) as f64
        } else {
            lx.max(1.0)
        };
        let dy = if ny > 1 {
            ly / (ny - 1) as f64
        } else {
            ly.max(1.0)
        };
        Self::new(nx, ny, dx, dy, x0, y0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn n_points(&self) -> usize {
        self.nx * self.ny
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    /// Flat row index of point `(i, j)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Same point layout, ignoring floating-point noise below `1e-9` of the spacing.
    pub fn same_layout(&self, other: &StructuredGrid) -> bool {
        let tol_x = 1e-9 * self.dx;
        let tol_y = 1e-9 * self.dy;
        self.nx == other.nx
            && self.ny == other.ny
            && (self.dx - other.dx).abs() <= tol_x
            && (self.dy - other.dy).abs() <= tol_y
            && (self.x0 - other.x0).abs() <= tol_x
            && (self.y0 - other.y0).abs() <= tol_y
    }
}

/// Velocity component carried by a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "u")]
    Streamwise,
    #[serde(rename = "v")]
    Transversal,
}

impl Component {
    pub const ALL: [Component; 2] = [Component::Streamwise, Component::Transversal];

    /// Short label used in file names and descriptors.
    pub fn label(self) -> &'static str {
        match self {
            Component::Streamwise => "u",
            Component::Transversal => "v",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" | "streamwise" => Ok(Component::Streamwise),
            "v" | "transversal" => Ok(Component::Transversal),
            other => Err(Error::Argument(format!(
                "unknown component `{other}` (expected u or v)"
            ))),
        }
    }
}

/// One velocity component sampled on a grid at a uniform time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    grid: StructuredGrid,
    component: Component,
    dt: f64,
    data: DMatrix<f64>,
}

impl SnapshotSeries {
    /// Validating constructor. `data` is `n_points x n_snapshots`.
    pub fn new(
        grid: StructuredGrid,
        component: Component,
        dt: f64,
        data: DMatrix<f64>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        if data.nrows() != grid.n_points() {
            return Err(Error::dimension(
                "points per snapshot",
                grid.n_points(),
                data.nrows(),
            ));
        }
        if data.ncols() == 0 {
            return Err(Error::Argument(
                "a series needs at least one snapshot".into(),
            ));
        }
        check_finite(&data)?;
        Ok(Self {
            grid,
            component,
            dt,
            data,
        })
    }

    /// Builds a series from time-ordered frames of `n_points` values each.
    pub fn from_frames(
        grid: StructuredGrid,
        component: Component,
        dt: f64,
        frames: &[Vec<f64>],
    ) -> Result<Self> {
        let n = grid.n_points();
        for frame in frames {
            if frame.len() != n {
                return Err(Error::dimension("points per snapshot", n, frame.len()));
            }
        }
        let data = DMatrix::from_iterator(n, frames.len(), frames.iter().flatten().copied());
        Self::new(grid, component, dt, data)
    }

    /// Replaces the data, keeping grid, component and dt. Skips the finiteness scan.
    pub(crate) fn with_data_unchecked(&self, data: DMatrix<f64>) -> Self {
        debug_assert_eq!(data.nrows(), self.grid.n_points());
        Self {
            grid: self.grid,
            component: self.component,
            dt: self.dt,
            data,
        }
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn component(&self) -> Component {
        self.component
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn n_points(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    /// Values of snapshot `t`, in grid order.
    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.n_points();
        &self.data.as_slice()[t * n..(t + 1) * n]
    }
}

fn check_finite(data: &DMatrix<f64>) -> Result<()> {
    let n = data.nrows();
    match data.as_slice().iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFinite {
            snapshot: k / n,
            point: k % n,
        }),
        None => Ok(()),
    }
}

/// Closed rectangle `[xmin, xmax] x [ymin, ymax]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BoxRegion {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if xmin.partial_cmp(&xmax) != Some(Ordering::Less)
            || ymin.partial_cmp(&ymax) != Some(Ordering::Less)
        {
            return Err(Error::Argument(format!(
                "box bounds must satisfy xmin < xmax and ymin < ymax, got [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Self {
            xmin,
            xmax,
            ymin,
            ymax,
        })
    }

    /// The extent of a grid, as a box.
    pub fn covering(grid: &StructuredGrid) -> Self {
        Self {
            xmin: grid.x0(),
            xmax: grid.x_max(),
            ymin: grid.y0(),
            ymax: grid.y_max(),
        }
    }
}

impl FromStr for BoxRegion {
    type Err = Error;

    /// Parses `xmin,xmax,ymin,ymax`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Argument(format!("box `{s}`: {e}")))?;
        match parts[..] {
            [xmin, xmax, ymin, ymax] => Self::new(xmin, xmax, ymin, ymax),
            _ => Err(Error::Argument(format!(
                "box `{s}` must have four comma-separated values xmin,xmax,ymin,ymax"
            ))),
        }
    }
}

/// Indices `lo..=hi` of the axis points `origin + k*step` lying in `[lo_bound, hi_bound]`.
fn axis_range(
    n: usize,
    origin: f64,
    step: f64,
    lo_bound: f64,
    hi_bound: f64,
) -> Option<(usize, usize)> {
    let tol = 1e-9 * step;
    let inside = |k: usize| {
        let c = origin + k as f64 * step;
        c >= lo_bound - tol && c <= hi_bound + tol
    };
    let lo = (0..n).find(|&k| inside(k))?;
    let hi = (lo..n).rev().find(|&k| inside(k))?;
    Some((lo, hi))
}

/// Restricts a series to the grid points inside `region` (boundary points included).
pub fn extract_box(series: &SnapshotSeries, region: &BoxRegion) -> Result<SnapshotSeries> {
    let g = series.grid();
    let empty = || {
        Error::Region(format!(
            "box [{}, {}] x [{}, {}] does not contain any grid point of [{}, {}] x [{}, {}]",
            region.xmin,
            region.xmax,
            region.ymin,
            region.ymax,
            g.x0(),
            g.x_max(),
            g.y0(),
            g.y_max()
        ))
    };
    let (i0, i1) =
        axis_range(g.nx(), g.x0(), g.dx(), region.xmin, region.xmax).ok_or_else(empty)?;
    let (j0, j1) =
        axis_range(g.ny(), g.y0(), g.dy(), region.ymin, region.ymax).ok_or_else(empty)?;

    let sub = StructuredGrid::new(i1 - i0 + 1, j1 - j0 + 1, g.dx(), g.dy(), g.x(i0), g.y(j0))?;
    let m = series.n_snapshots();
    let mut data = DMatrix::zeros(sub.n_points(), m);
    for t in 0..m {
        let frame = series.frame(t);
        let mut col = data.column_mut(t);
        for (jj, j) in (j0..=j1).enumerate() {
            for (ii, i) in (i0..=i1).enumerate() {
                col[sub.index(ii, jj)] = frame[g.index(i, j)];
            }
        }
    }
    Ok(SnapshotSeries {
        grid: sub,
        component: series.component(),
        dt: series.dt(),
        data,
    })
}

/// Arithmetic mean over snapshots at every grid point.
///
/// Accumulates snapshots in time order so the result does not depend on how the
/// work is scheduled.
pub fn time_mean(series: &SnapshotSeries) -> DVector<f64> {
    let m = series.n_snapshots();
    let mut acc = DVector::zeros(series.n_points());
    for t in 0..m {
        for (a, v) in acc.iter_mut().zip(series.frame(t)) {
            *a += v;
        }
    }
    acc / m as f64
}

/// Splits a series into its time mean and the fluctuations about it.
pub fn subtract_mean(series: &SnapshotSeries) -> (DVector<f64>, SnapshotSeries) {
    let mean = time_mean(series);
    let mut fluct = series.data().clone();
    for mut col in fluct.column_iter_mut() {
        col -= &mean;
    }
    let fluct = series.with_data_unchecked(fluct);
    (mean, fluct)
}

/// Inverse of [`subtract_mean`].
pub fn add_mean(mean: &DVector<f64>, fluctuations: &SnapshotSeries) -> Result<SnapshotSeries> {
    if mean.len() != fluctuations.n_points() {
        return Err(Error::dimension(
            "mean field length",
            fluctuations.n_points(),
            mean.len(),
        ));
    }
    let mut data = fluctuations.data().clone();
    for mut col in data.column_iter_mut() {
        col += mean;
    }
    Ok(fluctuations.with_data_unchecked(data))
}
