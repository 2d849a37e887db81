//! Synthetic vertical-axis wind-turbine wake.
//!
//! The generator produces streamwise and transversal velocity snapshots on a
//! grid downstream of a rotor centred at the origin:
//!
//! ```text
//! u = U * (1 - A * exp(-x / Lc) * exp(-y^2 / (2 w^2))) + vortex u + noise
//! v =                                                    vortex v + noise
//! ```
//!
//! Vortices have Gaussian cores, `u_theta = G / (2 pi r) * (1 - exp(-r^2 / rc^2))`.
//! They are released at `x = 0` at the shedding frequency, alternating between
//! the upper (clockwise) and lower (counter-clockwise) shear layers at
//! `y = +-w`, convect downstream at a fixed speed and lose strength as
//! `exp(-x / Lc)`. `leeward_bias` shifts every release point toward the
//! leeward (negative `y`) edge by up to `w / 2`.
//!
//! Noise is Gaussian, independent per point and snapshot, drawn from a ChaCha
//! stream keyed by `(seed, snapshot, component)` so frames can be produced in
//! any order with identical results.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Component, SnapshotSeries, StructuredGrid};

/// Rotor diameter of the reference turbine, meters.
pub const ROTOR_DIAMETER: f64 = 1.03;
/// Rotational speed of the reference turbine, rev/min.
pub const ROTOR_RPM: f64 = 400.0;
pub const BLADE_COUNT: usize = 3;

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

/// `omega * R / U` with `omega = rpm * 2 pi / 60` and `R = diameter / 2`.
pub fn tip_speed_ratio(rpm: f64, diameter: f64, inlet_velocity: f64) -> Result<f64> {
    require_positive("rpm", rpm)?;
    require_positive("rotor diameter", diameter)?;
    require_positive("inlet velocity", inlet_velocity)?;
    Ok(rpm * 2.0 * PI / 60.0 * (diameter / 2.0) / inlet_velocity)
}

/// Blade passages per second, in Hz.
pub fn blade_passing_frequency(rpm: f64, n_blades: usize) -> Result<f64> {
    require_positive("rpm", rpm)?;
    if n_blades == 0 {
        return Err(Error::Argument("blade count must be at least 1".into()));
    }
    Ok(rpm * n_blades as f64 / 60.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub rotor_diameter: f64,
    pub rpm: f64,
    pub inlet_velocity: f64,
}

impl OperatingPoint {
    pub fn new(rotor_diameter: f64, rpm: f64, inlet_velocity: f64) -> Result<Self> {
        tip_speed_ratio(rpm, rotor_diameter, inlet_velocity)?;
        Ok(Self {
            rotor_diameter,
            rpm,
            inlet_velocity,
        })
    }

    pub fn tsr(&self) -> f64 {
        self.rpm * 2.0 * PI / 60.0 * (self.rotor_diameter / 2.0) / self.inlet_velocity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWakeParams {
    pub operating_point: OperatingPoint,
    /// Centerline deficit at the rotor as a fraction of the inlet velocity.
    pub deficit_amplitude: f64,
    /// e-folding length of the deficit and of vortex strength, meters.
    pub collapse_length: f64,
    /// Standard deviation of the Gaussian deficit profile, meters.
    pub wake_half_width: f64,
    /// Vortices released per rotor revolution.
    pub n_vortices_per_period: usize,
    /// Circulation at release, m^2/s.
    pub vortex_strength: f64,
    pub vortex_core_radius: f64,
    pub convection_speed: f64,
    pub leeward_bias: f64,
    /// Standard deviation of the additive noise, m/s.
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl SyntheticWakeParams {
    pub fn validate(&self) -> Result<()> {
        let op = &self.operating_point;
        require_positive("rotor diameter", op.rotor_diameter)?;
        require_positive("rpm", op.rpm)?;
        require_positive("inlet velocity", op.inlet_velocity)?;
        if !(self.deficit_amplitude > 0.0 && self.deficit_amplitude < 1.0) {
            return Err(Error::Argument(format!(
                "deficit amplitude must lie in (0, 1), got {}",
                self.deficit_amplitude
            )));
        }
        require_positive("collapse length", self.collapse_length)?;
        require_positive("wake half width", self.wake_half_width)?;
        require_positive("vortex core radius", self.vortex_core_radius)?;
        require_positive("convection speed", self.convection_speed)?;
        if self.n_vortices_per_period == 0 {
            return Err(Error::Argument(
                "at least one vortex per revolution is required".into(),
            ));
        }
        if !(self.vortex_strength >= 0.0 && self.vortex_strength.is_finite()) {
            return Err(Error::Argument(format!(
                "vortex strength must be non-negative, got {}",
                self.vortex_strength
            )));
        }
        if !(0.0..=1.0).contains(&self.leeward_bias) {
            return Err(Error::Argument(format!(
                "leeward bias must lie in [0, 1], got {}",
                self.leeward_bias
            )));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(Error::Argument(format!(
                "noise amplitude must be non-negative, got {}",
                self.noise_amplitude
            )));
        }
        Ok(())
    }

    /// Vortex release rate, Hz.
    pub fn shedding_frequency(&self) -> f64 {
        self.operating_point.rpm / 60.0 * self.n_vortices_per_period as f64
    }

    /// Time-mean streamwise velocity without vortices or noise.
    pub fn base_velocity(&self, x: f64, y: f64) -> f64 {
        let w = self.wake_half_width;
        let u_inf = self.operating_point.inlet_velocity;
        u_inf
            * (1.0
                - self.deficit_amplitude
                    * (-x / self.collapse_length).exp()
                    * (-y * y / (2.0 * w * w)).exp())
    }

    /// Furthest downstream position at which a vortex is still tracked for a
    /// grid ending at `x_end`.
    fn tracking_limit(&self, x_end: f64) -> f64 {
        x_end + 4.0 * self.wake_half_width + 5.0 * self.vortex_core_radius
    }
}

/// Named operating points of the reference turbine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "tsr2.4")]
    Tsr24,
    #[serde(rename = "tsr3.3")]
    Tsr33,
    #[serde(rename = "tsr1.5")]
    Tsr15,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Tsr24, Preset::Tsr33, Preset::Tsr15];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Tsr24 => "tsr2.4",
            Preset::Tsr33 => "tsr3.3",
            Preset::Tsr15 => "tsr1.5",
        }
    }

    /// Inlet velocity giving this tip speed ratio at 400 rpm, m/s.
    pub fn inlet_velocity(self) -> f64 {
        match self {
            Preset::Tsr24 => 9.1,
            Preset::Tsr33 => 6.5,
            Preset::Tsr15 => 14.38,
        }
    }

    /// Deficit e-folding length in rotor diameters. Higher TSR, shorter wake.
    pub fn collapse_diameters(self) -> f64 {
        match self {
            Preset::Tsr24 => 6.0,
            Preset::Tsr33 => 4.0,
            Preset::Tsr15 => 9.0,
        }
    }

    pub fn params(self) -> SyntheticWakeParams {
        let d = ROTOR_DIAMETER;
        let u_inf = self.inlet_velocity();
        SyntheticWakeParams {
            operating_point: OperatingPoint {
                rotor_diameter: d,
                rpm: ROTOR_RPM,
                inlet_velocity: u_inf,
            },
            deficit_amplitude: 0.5,
            collapse_length: self.collapse_diameters() * d,
            wake_half_width: 0.5 * d,
            n_vortices_per_period: BLADE_COUNT,
            vortex_strength: 0.01 * u_inf * d,
            vortex_core_radius: 0.15 * d,
            convection_speed: 0.8 * u_inf,
            leeward_bias: 0.3,
            noise_amplitude: 0.005 * u_inf,
            seed: 0,
        }
    }

    pub fn names() -> String {
        Self::ALL.map(Preset::name).join(", ")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown preset `{s}`; valid presets: {}",
                    Self::names()
                ))
            })
    }
}

/// Default analysis window: `0 <= x <= 12 D`, `-2 D <= y <= 2 D`.
pub fn default_grid(params: &SyntheticWakeParams, nx: usize, ny: usize) -> Result<StructuredGrid> {
    grid_in_diameters(params, nx, ny, DEFAULT_LENGTH_D, DEFAULT_HALF_HEIGHT_D)
}

pub const DEFAULT_LENGTH_D: f64 = 12.0;
pub const DEFAULT_HALF_HEIGHT_D: f64 = 2.0;

/// Grid covering `x` in `[0, length_d * D]` and `y` in `[-half_height_d * D, half_height_d * D]`.
pub fn grid_in_diameters(
    params: &SyntheticWakeParams,
    nx: usize,
    ny: usize,
    length_d: f64,
    half_height_d: f64,
) -> Result<StructuredGrid> {
    if !(length_d > 0.0 && half_height_d > 0.0) {
        return Err(Error::Argument(format!(
            "domain extents must be positive, got {length_d} D by {half_height_d} D"
        )));
    }
    let d = params.operating_point.rotor_diameter;
    StructuredGrid::spanning(
        nx,
        ny,
        0.0,
        length_d * d,
        -half_height_d * d,
        2.0 * half_height_d * d,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Vortex {
    x: f64,
    y: f64,
    circulation: f64,
}

/// Vortices present at time `t`, ordered by release.
fn vortices_at(params: &SyntheticWakeParams, x_end: f64, t: f64) -> Vec<Vortex> {
    if params.vortex_strength == 0.0 {
        return Vec::new();
    }
    let f = params.shedding_frequency();
    let c = params.convection_speed;
    let w = params.wake_half_width;
    let max_age = params.tracking_limit(x_end) / c;
    let newest = (t * f).floor() as i64;
    let oldest = ((t - max_age) * f).ceil() as i64;
    let offset = -0.5 * params.leeward_bias * w;
    (oldest..=newest)
        .map(|k| {
            let age = t - k as f64 / f;
            let x = c * age;
            let upper = k.rem_euclid(2) == 0;
            let (y, sign) = if upper { (w, -1.0) } else { (-w, 1.0) };
            Vortex {
                x,
                y: y + offset,
                circulation: sign * params.vortex_strength * (-x / params.collapse_length).exp(),
            }
        })
        .filter(|v| v.x >= 0.0)
        .collect()
}

/// Velocity induced at `(px, py)` by one Gaussian-core vortex.
fn induced(v: &Vortex, core_radius: f64, px: f64, py: f64) -> (f64, f64) {
    let dx = px - v.x;
    let dy = py - v.y;
    let r2 = dx * dx + dy * dy;
    let rc2 = core_radius * core_radius;
    // u_theta / r, finite as r -> 0
    let k = if r2 > 1e-12 * rc2 {
        v.circulation / (2.0 * PI * r2) * (1.0 - (-r2 / rc2).exp())
    } else {
        v.circulation / (2.0 * PI * rc2)
    };
    (-k * dy, k * dx)
}

fn noise_stream(seed: u64, snapshot: usize, component: Component) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lane = match component {
        Component::Streamwise => 0,
        Component::Transversal => 1,
    };
    rng.set_stream(2 * snapshot as u64 + lane);
    rng
}

/// Generates `n_snapshots` frames spaced `dt` apart, starting at `t = 0`.
///
/// The vortex street is already fully developed at `t = 0`.
pub fn generate(
    params: &SyntheticWakeParams,
    grid: &StructuredGrid,
    n_snapshots: usize,
    dt: f64,
) -> Result<(SnapshotSeries, SnapshotSeries)> {
    params.validate()?;
    if n_snapshots < 2 {
        return Err(Error::Argument(format!(
            "at least two snapshots are required, got {n_snapshots}"
        )));
    }
    require_positive("dt", dt)?;
    if grid.x0() < 0.0 {
        return Err(Error::Argument(format!(
            "the grid must lie downstream of the rotor (x >= 0), starts at {}",
            grid.x0()
        )));
    }

    let n = grid.n_points();
    let base: Vec<f64> = (0..n)
        .map(|p| params.base_velocity(grid.x(p % grid.nx()), grid.y(p / grid.nx())))
        .collect();

    let frames: Vec<(Vec<f64>, Vec<f64>)> = (0..n_snapshots)
        .into_par_iter()
        .map(|s| {
            let t = s as f64 * dt;
            let vortices = vortices_at(params, grid.x_max(), t);
            let mut u = base.clone();
            let mut v = vec![0.0; n];
            if !vortices.is_empty() {
                for j in 0..grid.ny() {
                    let py = grid.y(j);
                    for i in 0..grid.nx() {
                        let px = grid.x(i);
                        let p = grid.index(i, j);
                        for vx in &vortices {
                            let (du, dv) = induced(vx, params.vortex_core_radius, px, py);
                            u[p] += du;
                            v[p] += dv;
                        }
                    }
                }
            }
            if params.noise_amplitude > 0.0 {
                for (values, component) in [
                    (&mut u, Component::Streamwise),
                    (&mut v, Component::Transversal),
                ] {
                    let mut rng = noise_stream(params.seed, s, component);
                    for value in values.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *value += params.noise_amplitude * z;
                    }
                }
            }
            (u, v)
        })
        .collect();

    let mut u = DMatrix::zeros(n, n_snapshots);
    let mut v = DMatrix::zeros(n, n_snapshots);
    for (s, (fu, fv)) in frames.into_iter().enumerate() {
        u.column_mut(s).copy_from_slice(&fu);
        v.column_mut(s).copy_from_slice(&fv);
    }
    Ok((
        SnapshotSeries::new(*grid, Component::Streamwise, dt, u)?,
        SnapshotSeries::new(*grid, Component::Transversal, dt, v)?,
    ))
}

/// Number of vortices tracked at time `t`; exposed for bounds checks.
pub fn vortex_count(params: &SyntheticWakeParams, grid: &StructuredGrid, t: f64) -> usize {
    vortices_at(params, grid.x_max(), t).len()
}

/// Upper bound on [`vortex_count`]: shedding rate times transit time, plus one.
pub fn vortex_count_bound(params: &SyntheticWakeParams, grid: &StructuredGrid) -> usize {
    let transit = params.tracking_limit(grid.x_max()) / params.convection_speed;
    (params.shedding_frequency() * transit).ceil() as usize + 1
}

/// Index into a signal of length `n` extended by half-sample mirror symmetry
/// (`-1 -> 0`, `n -> n - 1`), periodic with period `2n`.
fn mirror(k: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let k = k.rem_euclid(period) as usize;
    if k < n {
        k
    } else {
        2 * n - 1 - k
    }
}

/// Box average of half-width `radius` along a strided line, mirrored at the ends.
fn smooth_line(src: &[f64], dst: &mut [f64], radius: usize) {
    let n = src.len();
    let width = (2 * radius + 1) as f64;
    for (i, out) in dst.iter_mut().enumerate() {
        let mut acc = 0.0;
        for d in -(radius as isize)..=radius as isize {
            acc += src[mirror(i as isize + d, n)];
        }
        *out = acc / width;
    }
}

fn smooth_frame(frame: &[f64], grid: &StructuredGrid, radius: usize) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut rows = vec![0.0; frame.len()];
    for j in 0..ny {
        smooth_line(
            &frame[j * nx..(j + 1) * nx],
            &mut rows[j * nx..(j + 1) * nx],
            radius,
        );
    }
    let mut out = vec![0.0; frame.len()];
    let mut line = vec![0.0; ny];
    let mut smoothed = vec![0.0; ny];
    for i in 0..nx {
        for j in 0..ny {
            line[j] = rows[j * nx + i];
        }
        smooth_line(&line, &mut smoothed, radius);
        for j in 0..ny {
            out[j * nx + i] = smoothed[j];
        }
    }
    out
}

/// Smooths every snapshot with a normalized `(2k+1) x (2k+1)` box kernel
/// (mirrored boundaries), emulating the reduced resolved content of a
/// lower-fidelity simulation. The mirror extension gives every point equal
/// total weight, so the spatial mean of each snapshot is unchanged.
pub fn fidelity_filter(series: &SnapshotSeries, kernel_radius: usize) -> SnapshotSeries {
    if kernel_radius == 0 {
        return series.clone();
    }
    let grid = *series.grid();
    let frames: Vec<Vec<f64>> = (0..series.n_snapshots())
        .into_par_iter()
        .map(|t| smooth_frame(series.frame(t), &grid, kernel_radius))
        .collect();
    let data = DMatrix::from_iterator(
        series.n_points(),
        series.n_snapshots(),
        frames.into_iter().flatten(),
    );
    series.with_data_unchecked(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsr_of_reference_operating_points() {
        let t24 = tip_speed_ratio(400.0, 1.03, 9.1).unwrap();
        let t15 = tip_speed_ratio(400.0, 1.03, 14.38).unwrap();
        assert!((t24 - 2.37).abs() <= 0.03, "{t24}");
        assert!((t15 - 1.50).abs() <= 0.02, "{t15}");
    }

    #[test]
    fn tsr_decreases_with_inlet_velocity() {
        let mut last = f64::INFINITY;
        for u in [1.0, 10.0, 100.0, 1e4, 1e8] {
            let t = tip_speed_ratio(400.0, 1.03, u).unwrap();
            assert!(t < last);
            last = t;
        }
        assert!(last < 1e-6);
        assert!(tip_speed_ratio(0.0, 1.03, 9.1).is_err());
        assert!(tip_speed_ratio(400.0, -1.0, 9.1).is_err());
        assert!(tip_speed_ratio(400.0, 1.03, 0.0).is_err());
    }

    #[test]
    fn blade_passing() {
        assert_eq!(blade_passing_frequency(400.0, 3).unwrap(), 20.0);
        assert_eq!(blade_passing_frequency(60.0, 1).unwrap(), 1.0);
        let samples = 1.0 / blade_passing_frequency(400.0, 3).unwrap() / 1e-4;
        assert!((samples - 500.0).abs() < 1e-9);
        assert!(blade_passing_frequency(400.0, 0).is_err());
        assert!(blade_passing_frequency(-1.0, 3).is_err());
    }

    #[test]
    fn operating_point_tsr_is_consistent() {
        let op = OperatingPoint::new(1.03, 400.0, 6.5).unwrap();
        assert!((op.tsr() - tip_speed_ratio(400.0, 1.03, 6.5).unwrap()).abs() < 1e-9);
        assert!(OperatingPoint::new(1.03, 400.0, 0.0).is_err());
    }

    #[test]
    fn preset_lookup() {
        assert_eq!("tsr3.3".parse::<Preset>().unwrap(), Preset::Tsr33);
        let err = "tsr9".parse::<Preset>().unwrap_err().to_string();
        assert!(err.contains("tsr2.4") && err.contains("tsr1.5"));
        for p in Preset::ALL {
            p.params().validate().unwrap();
        }
    }

    #[test]
    fn params_validation() {
        let mut p = Preset::Tsr24.params();
        p.deficit_amplitude = 1.0;
        assert!(p.validate().is_err());
        let mut p = Preset::Tsr24.params();
        p.leeward_bias = 1.5;
        assert!(p.validate().is_err());
        let mut p = Preset::Tsr24.params();
        p.vortex_core_radius = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn mirror_indexing() {
        let idx: Vec<usize> = (-3..7).map(|k| mirror(k, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(mirror(-1, 1), 0);
        assert_eq!(mirror(5, 1), 0);
    }

    #[test]
    fn vortices_alternate_and_decay() {
        let p = Preset::Tsr24.params();
        let vs = vortices_at(&p, 12.0, 0.37);
        assert!(!vs.is_empty());
        for pair in vs.windows(2) {
            assert!(pair[0].circulation.signum() != pair[1].circulation.signum());
            assert!(pair[0].x > pair[1].x);
            assert!(pair[0].circulation.abs() < pair[1].circulation.abs());
        }
        let off = SyntheticWakeParams {
            vortex_strength: 0.0,
            ..p
        };
        assert!(vortices_at(&off, 12.0, 0.37).is_empty());
    }

    #[test]
    fn induced_velocity_is_finite_at_core() {
        let v = Vortex {
            x: 0.0,
            y: 0.0,
            circulation: 1.0,
        };
        let (u0, v0) = induced(&v, 0.1, 0.0, 0.0);
        assert_eq!((u0, v0), (0.0, 0.0));
        // counter-clockwise: above the core the flow runs toward -x
        let (u1, _) = induced(&v, 0.1, 0.0, 0.2);
        assert!(u1 < 0.0);
        // far field tends to a point vortex
        let (_, v2) = induced(&v, 0.1, 10.0, 0.0);
        assert!((v2 - 1.0 / (2.0 * PI * 10.0)).abs() < 1e-12);
    }
}
