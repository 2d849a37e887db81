//! Wake statistics from time-averaged fields: station profiles, velocity
//! deficit and the downstream distance at which the deficit collapses.

use std::cmp::Ordering;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{time_mean, Component, SnapshotSeries, StructuredGrid};

/// Default collapse threshold: deficit below 10% of the inlet velocity.
pub const DEFAULT_COLLAPSE_THRESHOLD: f64 = 0.1;
/// Default profile station, in rotor diameters behind the rotor.
pub const DEFAULT_STATION: f64 = 3.5;

/// Time average at every grid point.
pub fn time_average(series: &SnapshotSeries) -> DVector<f64> {
    time_mean(series)
}

/// A velocity profile across the wake at a fixed downstream station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationProfile {
    #[serde(rename = "station_x_over_D")]
    pub station_x_over_d: f64,
    #[serde(rename = "y_over_D")]
    pub y_over_d: Vec<f64>,
    pub mean_velocity: Vec<f64>,
    pub component: Component,
}

fn check_field(field: &[f64], grid: &StructuredGrid) -> Result<()> {
    if field.len() != grid.n_points() {
        return Err(Error::dimension(
            "field length",
            grid.n_points(),
            field.len(),
        ));
    }
    Ok(())
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

/// Column index nearest to `x`; exact midpoints go to the lower index.
fn nearest_column(grid: &StructuredGrid, x: f64) -> usize {
    let f = (x - grid.x0()) / grid.dx();
    let i = (f - 0.5).ceil().max(0.0) as usize;
    i.min(grid.nx() - 1)
}

/// Extracts the grid column nearest to `x = station * diameter`, without
/// interpolation. The returned `y` axis is in rotor diameters.
pub fn profile_at_station(
    field: &[f64],
    grid: &StructuredGrid,
    component: Component,
    diameter: f64,
    station_x_over_d: f64,
) -> Result<StationProfile> {
    check_field(field, grid)?;
    require_positive("rotor diameter", diameter)?;
    let x = station_x_over_d * diameter;
    let tol = 1e-9 * grid.dx();
    if !(x >= grid.x0() - tol && x <= grid.x_max() + tol) {
        return Err(Error::Region(format!(
            "station {station_x_over_d} D (x = {x} m) lies outside the grid x-range [{}, {}] m",
            grid.x0(),
            grid.x_max()
        )));
    }
    let i = nearest_column(grid, x);
    Ok(StationProfile {
        station_x_over_d,
        y_over_d: (0..grid.ny()).map(|j| grid.y(j) / diameter).collect(),
        mean_velocity: (0..grid.ny()).map(|j| field[grid.index(i, j)]).collect(),
        component,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitStats {
    /// `max(1 - u / U)` across the profile.
    pub max_deficit_fraction: f64,
    /// Width of the region around the peak where the deficit is at least half
    /// its maximum, in rotor diameters.
    #[serde(rename = "half_deficit_width_over_D")]
    pub half_deficit_width_over_d: f64,
}

/// Peak deficit and full width at half deficit of a profile.
///
/// A profile with no positive deficit reports `(0, 0)`.
pub fn deficit_stats(profile: &StationProfile, inlet_velocity: f64) -> Result<DeficitStats> {
    require_positive("inlet velocity", inlet_velocity)?;
    let y = &profile.y_over_d;
    if y.len() != profile.mean_velocity.len() || y.is_empty() {
        return Err(Error::Argument(
            "profile axes must be non-empty and of equal length".into(),
        ));
    }
    if y.windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
    {
        return Err(Error::Argument(
            "profile y must be strictly increasing".into(),
        ));
    }
    let deficit: Vec<f64> = profile
        .mean_velocity
        .iter()
        .map(|u| 1.0 - u / inlet_velocity)
        .collect();
    let (peak, max) =
        deficit
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, d)| {
                if d > best.1 {
                    (k, d)
                } else {
                    best
                }
            });
    if max <= 0.0 {
        return Ok(DeficitStats {
            max_deficit_fraction: 0.0,
            half_deficit_width_over_d: 0.0,
        });
    }
    let half = 0.5 * max;
    let crossing = |inner: usize, outer: usize| {
        let (d_in, d_out) = (deficit[inner], deficit[outer]);
        let s = (d_in - half) / (d_in - d_out);
        y[inner] + s * (y[outer] - y[inner])
    };
    let mut lo = peak;
    while lo > 0 && deficit[lo - 1] >= half {
        lo -= 1;
    }
    let left = if lo > 0 { crossing(lo, lo - 1) } else { y[0] };
    let mut hi = peak;
    while hi + 1 < y.len() && deficit[hi + 1] >= half {
        hi += 1;
    }
    let right = if hi + 1 < y.len() {
        crossing(hi, hi + 1)
    } else {
        y[y.len() - 1]
    };
    Ok(DeficitStats {
        max_deficit_fraction: max,
        half_deficit_width_over_d: right - left,
    })
}

/// Maximum deficit `1 - u / U` over each grid column, upstream to downstream.
pub fn column_max_deficits(
    mean_field: &[f64],
    grid: &StructuredGrid,
    inlet_velocity: f64,
) -> Result<Vec<f64>> {
    check_field(mean_field, grid)?;
    require_positive("inlet velocity", inlet_velocity)?;
    Ok((0..grid.nx())
        .map(|i| {
            (0..grid.ny())
                .map(|j| 1.0 - mean_field[grid.index(i, j)] / inlet_velocity)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    #[serde(rename = "x_over_D")]
    pub x_over_d: f64,
    pub threshold: f64,
    /// False when the deficit never settles below the threshold in the domain.
    pub collapsed: bool,
}

/// Smallest downstream distance beyond which the column maximum deficit stays
/// below `threshold`.
///
/// The crossing is linearly interpolated between the last column at or above
/// the threshold and the first column of the persistently-below tail. If the
/// last column is still above the threshold the domain end is returned with
/// `collapsed = false`.
pub fn collapse_length(
    mean_field: &[f64],
    grid: &StructuredGrid,
    inlet_velocity: f64,
    diameter: f64,
    threshold: f64,
) -> Result<CollapseReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Argument(format!(
            "collapse threshold must lie in (0, 1), got {threshold}"
        )));
    }
    require_positive("rotor diameter", diameter)?;
    let deficits = column_max_deficits(mean_field, grid, inlet_velocity)?;
    let tail_start = deficits
        .iter()
        .rposition(|&d| d >= threshold)
        .map_or(0, |k| k + 1);
    if tail_start == deficits.len() {
        return Ok(CollapseReport {
            x_over_d: grid.x_max() / diameter,
            threshold,
            collapsed: false,
        });
    }
    let x = if tail_start == 0 {
        grid.x0()
    } else {
        let (above, below) = (deficits[tail_start - 1], deficits[tail_start]);
        let s = (above - threshold) / (above - below);
        grid.x(tail_start - 1) + s * grid.dx()
    };
    Ok(CollapseReport {
        x_over_d: x / diameter,
        threshold,
        collapsed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> StructuredGrid {
        StructuredGrid::new(nx, ny, 1.0, 0.5, 0.0, -1.0).unwrap()
    }

    #[test]
    fn station_on_grid_line_is_verbatim() {
        let g = grid(4, 3);
        let field: Vec<f64> = (0..12).map(|p| p as f64).collect();
        let prof = profile_at_station(&field, &g, Component::Streamwise, 1.0, 2.0).unwrap();
        assert_eq!(prof.mean_velocity, vec![2.0, 6.0, 10.0]);
        assert_eq!(prof.y_over_d, vec![-1.0, -0.5, 0.0]);
    }

    #[test]
    fn station_midway_takes_lower_column() {
        let g = grid(4, 1);
        let field = vec![0.0, 1.0, 2.0, 3.0];
        let at = |s: f64| {
            profile_at_station(&field, &g, Component::Streamwise, 1.0, s)
                .unwrap()
                .mean_velocity[0]
        };
        assert_eq!(at(1.5), 1.0);
        assert_eq!(at(1.51), 2.0);
        assert_eq!(at(1.49), 1.0);
        assert_eq!(at(0.0), 0.0);
        assert_eq!(at(3.0), 3.0);
    }

    #[test]
    fn station_outside_grid_is_region_error() {
        let g = grid(4, 1);
        let field = vec![0.0; 4];
        assert!(matches!(
            profile_at_station(&field, &g, Component::Streamwise, 1.0, 99.0),
            Err(Error::Region(_))
        ));
        assert!(matches!(
            profile_at_station(&field, &g, Component::Streamwise, 1.0, -0.5),
            Err(Error::Region(_))
        ));
    }

    fn profile(y: Vec<f64>, u: Vec<f64>) -> StationProfile {
        StationProfile {
            station_x_over_d: 1.0,
            y_over_d: y,
            mean_velocity: u,
            component: Component::Streamwise,
        }
    }

    #[test]
    fn uniform_profile_has_no_deficit() {
        let p = profile(vec![0.0, 1.0, 2.0], vec![5.0; 3]);
        let s = deficit_stats(&p, 5.0).unwrap();
        assert_eq!(s.max_deficit_fraction, 0.0);
        assert_eq!(s.half_deficit_width_over_d, 0.0);
    }

    #[test]
    fn triangle_deficit_width_interpolates() {
        // deficit 0, 0.5, 1, 0.5, 0 at y = 0..4: half level 0.5 reached at y=1 and y=3
        let p = profile(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![2.0, 1.0, 0.0, 1.0, 2.0]);
        let s = deficit_stats(&p, 2.0).unwrap();
        assert_eq!(s.max_deficit_fraction, 1.0);
        assert!((s.half_deficit_width_over_d - 2.0).abs() < 1e-12);
        // shifted y axis gives the same numbers
        let q = profile(vec![10.0, 11.0, 12.0, 13.0, 14.0], p.mean_velocity.clone());
        assert_eq!(deficit_stats(&q, 2.0).unwrap(), s);
    }

    #[test]
    fn deficit_touching_edge_uses_edge() {
        let p = profile(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 2.0]);
        let s = deficit_stats(&p, 2.0).unwrap();
        assert!((s.half_deficit_width_over_d - 1.5).abs() < 1e-12);
    }

    #[test]
    fn deficit_rejects_bad_input() {
        assert!(deficit_stats(&profile(vec![0.0], vec![1.0]), 0.0).is_err());
        assert!(deficit_stats(&profile(vec![1.0, 0.0], vec![1.0, 1.0]), 1.0).is_err());
    }

    #[test]
    fn zero_deficit_field_collapses_at_origin() {
        let g = grid(5, 3);
        let field = vec![7.0; 15];
        let r = collapse_length(&field, &g, 7.0, 1.0, 0.1).unwrap();
        assert_eq!(r.x_over_d, 0.0);
        assert!(r.collapsed);
    }

    #[test]
    fn growing_deficit_never_collapses() {
        let g = grid(5, 1);
        let field: Vec<f64> = (0..5).map(|i| 10.0 - i as f64).collect();
        let r = collapse_length(&field, &g, 10.0, 1.0, 0.05).unwrap();
        assert!(!r.collapsed);
        assert_eq!(r.x_over_d, 4.0);
    }

    #[test]
    fn local_recovery_is_not_collapse() {
        // deficits 0.5, 0.05, 0.3, 0.05, 0.0 with threshold 0.1: collapse after column 2
        let g = grid(5, 1);
        let field = vec![0.5, 0.95, 0.7, 0.95, 1.0];
        let r = collapse_length(&field, &g, 1.0, 1.0, 0.1).unwrap();
        // interpolated between x=2 (0.3) and x=3 (0.05)
        assert!((r.x_over_d - (2.0 + 0.2 / 0.25)).abs() < 1e-12);
    }

    #[test]
    fn collapse_rejects_bad_threshold() {
        let g = grid(2, 1);
        assert!(collapse_length(&[1.0, 1.0], &g, 1.0, 1.0, 0.0).is_err());
        assert!(collapse_length(&[1.0, 1.0], &g, 1.0, 1.0, 1.0).is_err());
        assert!(collapse_length(&[1.0], &g, 1.0, 1.0, 0.5).is_err());
    }
}
