//! Command-line front end: argument parsing, artifact layout and exit codes.
//!
//! Exit codes: 0 on success, 1 for I/O, format, data or numerical failures,
//! 2 for usage, argument, region and dimension errors.

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::compare::{self, CompareOptions, DEFAULT_MAC_FLOOR};
use crate::error::{Error, Result};
use crate::export::{self, Curve};
use crate::field::{
    extract_box, load_series, load_series_csv, read_meta, save_csv_dataset, save_dataset,
    subtract_mean, BoxRegion, Component, SnapshotSeries, StructuredGrid, META_FILE,
};
use crate::metrics::{self, DEFAULT_COLLAPSE_THRESHOLD, DEFAULT_STATION};
use crate::pod::{self, Algorithm, PodResult};
use crate::synth::{self, Preset, DEFAULT_HALF_HEIGHT_D, DEFAULT_LENGTH_D};

const LOCK_FILE: &str = ".wakepod.lock";

#[derive(Debug, Parser)]
#[command(
    name = "wakepod",
    version,
    about = "Snapshot POD of 2D wind-turbine wake velocity fields"
)]
pub struct Cli {
    /// Output directory for the command's artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Random seed for synthetic data (overrides the preset seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Also write SVG plots next to the CSV output.
    #[arg(long, global = true)]
    pub svg: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic wake dataset from a preset.
    Synth(SynthArgs),
    /// Decompose a velocity component into POD modes.
    Decompose(DecomposeArgs),
    /// Station profile, deficit statistics and wake collapse length.
    Profile(ProfileArgs),
    /// Compare the decompositions of two datasets.
    Compare(CompareArgs),
    /// Print the resolved configuration, presets and optional dataset summary.
    Info(InfoArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// One of tsr2.4, tsr3.3, tsr1.5.
    #[arg(long, default_value = "tsr2.4")]
    pub preset: Preset,
    #[arg(long, default_value_t = 128)]
    pub nx: usize,
    #[arg(long, default_value_t = 64)]
    pub ny: usize,
    #[arg(long, default_value_t = 256)]
    pub snapshots: usize,
    /// Time between snapshots, seconds.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Box-filter radius in cells applied to every frame (0 = raw).
    #[arg(long, default_value_t = 0)]
    pub filter_radius: usize,
    /// Streamwise extent in rotor diameters, starting at the rotor.
    #[arg(long, default_value_t = DEFAULT_LENGTH_D)]
    pub length_d: f64,
    /// Transversal half-extent in rotor diameters.
    #[arg(long, default_value_t = DEFAULT_HALF_HEIGHT_D)]
    pub half_height_d: f64,
    /// Write snap_*.csv files instead of the binary layout.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentChoice {
    U,
    V,
    /// Both components stacked into one vector field.
    Uv,
}

impl ComponentChoice {
    fn single(self) -> Option<Component> {
        match self {
            ComponentChoice::U => Some(Component::Streamwise),
            ComponentChoice::V => Some(Component::Transversal),
            ComponentChoice::Uv => None,
        }
    }
}

/// How a dataset is turned into a snapshot matrix.
#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixArgs {
    #[arg(long, value_enum, default_value = "u")]
    pub component: ComponentChoice,
    /// Analysis box in grid coordinates (meters): xmin,xmax,ymin,ymax.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub region: Option<BoxRegion>,
    /// Remove the time mean before decomposing.
    #[arg(long)]
    pub mean_subtract: bool,
    /// direct, snapshots or auto.
    #[arg(long, default_value = "auto")]
    pub algorithm: Algorithm,
    /// Snapshot spacing for CSV datasets, which do not record it.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    /// Dataset directory (binary with meta.json, or snap_*.csv).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Keep this many leading modes.
    #[arg(long, conflicts_with = "energy")]
    pub rank: Option<usize>,
    /// Keep the fewest modes reaching this cumulative energy fraction.
    #[arg(long)]
    pub energy: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProfileArgs {
    /// Dataset directory (binary with meta.json, or snap_*.csv).
    #[arg(long)]
    pub input: PathBuf,
    /// Downstream station in rotor diameters.
    #[arg(long, default_value_t = DEFAULT_STATION)]
    pub station: f64,
    /// Rotor diameter in meters (default: from the dataset provenance).
    #[arg(long)]
    pub diameter: Option<f64>,
    /// Free-stream velocity in m/s (default: from the dataset provenance).
    #[arg(long)]
    pub inlet_velocity: Option<f64>,
    /// Deficit fraction below which the wake counts as collapsed.
    #[arg(long, default_value_t = DEFAULT_COLLAPSE_THRESHOLD)]
    pub collapse_threshold: f64,
    /// Component for the station profile; the collapse length always uses u.
    #[arg(long, value_enum, default_value = "u")]
    pub component: ComponentChoice,
    /// Snapshot spacing for CSV datasets, which do not record it.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// First dataset directory.
    #[arg(long)]
    pub a: PathBuf,
    /// Second dataset directory.
    #[arg(long)]
    pub b: PathBuf,
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Leading modes entering the MAC matrix and principal angles.
    #[arg(long, default_value_t = 10)]
    pub modes: usize,
    /// Energy threshold for the effective mode counts.
    #[arg(long, default_value_t = 0.99)]
    pub threshold: f64,
    /// Pairs whose MAC falls below this are left unmatched.
    #[arg(long, default_value_t = DEFAULT_MAC_FLOOR)]
    pub mac_floor: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct InfoArgs {
    /// Dataset to summarize.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Argument(_) | Error::Region(_) | Error::Dimension { .. } => 2,
        Error::Format { .. }
        | Error::NonFinite { .. }
        | Error::DegenerateMode(_)
        | Error::Numerical(_)
        | Error::Io { .. } => 1,
    }
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be at least 1".into()));
        }
        // a pool that is already built (repeated in-process runs) is kept
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Decompose(a) => cmd_decompose(cli, a),
        Command::Profile(a) => cmd_profile(cli, a),
        Command::Compare(a) => cmd_compare(cli, a),
        Command::Info(a) => cmd_info(cli, a),
    }
}

/// Advisory lock on an output directory, removed on drop.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::io(
                &path,
                std::io::Error::new(
                    ErrorKind::AlreadyExists,
                    "output directory is in use by another run (remove the lock file if stale)",
                ),
            )),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn output_dir(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Argument("--out is required for this command".into()))
}

fn provenance(command: &str, settings: &impl Serialize) -> Value {
    json!({
        "tool": "wakepod",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "settings": serde_json::to_value(settings).expect("settings serialize"),
    })
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(ErrorKind::NotFound, "dataset directory not found"),
        ))
    }
}

/// Loads one component from a binary dataset, or from `snap_*.csv` when no
/// descriptor is present (which needs an explicit `dt`).
fn load_component(dir: &Path, component: Component, dt: Option<f64>) -> Result<SnapshotSeries> {
    require_dir(dir)?;
    if !dir.join(META_FILE).exists() && dir.join("snap_0000.csv").exists() {
        let dt = dt.ok_or_else(|| {
            Error::Argument(format!(
                "{} is a CSV dataset, which does not record the time step; pass --dt",
                dir.display()
            ))
        })?;
        return load_series_csv(dir, component, dt);
    }
    load_series(dir, component)
}

/// Snapshot matrix of a dataset plus the grid it lives on.
struct Prepared {
    matrix: nalgebra::DMatrix<f64>,
    grid: StructuredGrid,
    dt: f64,
}

fn prepare(dir: &Path, args: &MatrixArgs) -> Result<Prepared> {
    let components: Vec<Component> = match args.component.single() {
        Some(c) => vec![c],
        None => Component::ALL.to_vec(),
    };
    let mut series = Vec::with_capacity(components.len());
    for c in components {
        let mut s = load_component(dir, c, args.dt)?;
        if let Some(region) = &args.region {
            s = extract_box(&s, region)?;
        }
        if args.mean_subtract {
            s = subtract_mean(&s).1;
        }
        series.push(s);
    }
    let grid = *series[0].grid();
    let dt = series[0].dt();
    let matrix = match &series[..] {
        [single] => pod::assemble_snapshot_matrix(single),
        [u, v] => pod::assemble_vector_matrix(u, v)?,
        _ => unreachable!("one or two components"),
    };
    Ok(Prepared { matrix, grid, dt })
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let out = output_dir(cli)?;
    let mut params = args.preset.params();
    if let Some(seed) = cli.seed {
        params.seed = seed;
    }
    params.validate()?;
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(Error::Argument(format!(
            "--dt must be positive, got {}",
            args.dt
        )));
    }
    let grid =
        synth::grid_in_diameters(&params, args.nx, args.ny, args.length_d, args.half_height_d)?;
    let _lock = OutputLock::acquire(out)?;
    let (mut u, mut v) = synth::generate(&params, &grid, args.snapshots, args.dt)?;
    if args.filter_radius > 0 {
        u = synth::fidelity_filter(&u, args.filter_radius);
        v = synth::fidelity_filter(&v, args.filter_radius);
    }
    let prov = json!({
        "tool": "wakepod",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "synth",
        "preset": args.preset.name(),
        "params": params,
        "tip_speed_ratio": params.operating_point.tsr(),
        "filter_radius": args.filter_radius,
    });
    if args.csv {
        save_csv_dataset(&u, &v, out)?;
        export::write_json(&prov, &out.join("provenance.json"))
    } else {
        save_dataset(&[&u, &v], out, Some(&prov))
    }
}

#[derive(Serialize)]
struct DecomposeSummary {
    algorithm_requested: Algorithm,
    algorithm_used: Algorithm,
    component: ComponentChoice,
    mean_subtracted: bool,
    grid: StructuredGrid,
    n_rows: usize,
    n_snapshots: usize,
    full_rank: usize,
    retained_rank: usize,
    total_energy: f64,
    effective_modes_0_99: usize,
    full_rank_reconstruction_error: f64,
    retained_reconstruction_error: f64,
}

fn cmd_decompose(cli: &Cli, args: &DecomposeArgs) -> Result<()> {
    let out = output_dir(cli)?;
    let prep = prepare(&args.input, &args.matrix)?;
    let _lock = OutputLock::acquire(out)?;
    let (n, m) = prep.matrix.shape();
    let used = args.matrix.algorithm.resolve(n, m);
    let full = pod::decompose(&prep.matrix, used)?;
    if full.is_empty() {
        return Err(Error::Numerical(
            "the snapshot matrix is identically zero".into(),
        ));
    }
    let keep = match (args.rank, args.energy) {
        (Some(r), _) => r,
        (None, Some(e)) => pod::effective_mode_count(&full, e)?,
        (None, None) => full.rank(),
    };
    let retained = pod::truncate(&full, keep)?;
    let summary = DecomposeSummary {
        algorithm_requested: args.matrix.algorithm,
        algorithm_used: used,
        component: args.matrix.component,
        mean_subtracted: args.matrix.mean_subtract,
        grid: prep.grid,
        n_rows: n,
        n_snapshots: m,
        full_rank: full.rank(),
        retained_rank: retained.rank(),
        total_energy: full.total_energy(),
        effective_modes_0_99: pod::effective_mode_count(&full, 0.99)?,
        full_rank_reconstruction_error: pod::relative_frobenius_error(
            &pod::reconstruct(&full),
            &prep.matrix,
        ),
        retained_reconstruction_error: pod::relative_frobenius_error(
            &pod::reconstruct(&retained),
            &prep.matrix,
        ),
    };
    let prov = provenance("decompose", args);
    export::write_modes(
        &retained,
        &prep.grid,
        args.matrix.component.single(),
        &out.join("modes"),
        Some(&prov),
    )?;
    export::write_spectrum_csv(&retained, &out.join("spectrum.csv"))?;
    export::write_cumulative_csv(&retained, &out.join("cumulative.csv"))?;
    export::write_coefficients_csv(&retained, prep.dt, &out.join("coefficients.csv"))?;
    export::write_json(&summary, &out.join("summary.json"))?;
    if cli.svg {
        let svg = export::line_chart_svg(
            "Cumulative POD energy",
            "mode number",
            "cumulative energy fraction",
            &[Curve {
                label: "cumulative",
                points: export::cumulative_energy_curve(&retained),
            }],
        );
        export::write_svg(&svg, &out.join("cumulative.svg"))?;
    }
    export::write_json(&prov, &out.join(META_FILE))
}

/// Looks up `params.operating_point.<key>` in a synthetic dataset's provenance.
fn operating_point_value(dir: &Path, key: &str) -> Option<f64> {
    let prov = if dir.join(META_FILE).exists() {
        read_meta(dir).ok()?.provenance?
    } else {
        serde_json::from_str(&fs::read_to_string(dir.join("provenance.json")).ok()?).ok()?
    };
    prov.get("params")?
        .get("operating_point")?
        .get(key)?
        .as_f64()
}

fn cmd_profile(cli: &Cli, args: &ProfileArgs) -> Result<()> {
    let out = output_dir(cli)?;
    require_dir(&args.input)?;
    let resolve = |given: Option<f64>, key: &str, flag: &str| {
        given
            .or_else(|| operating_point_value(&args.input, key))
            .ok_or_else(|| {
                Error::Argument(format!(
                    "{flag} is required: the dataset does not record `{key}`"
                ))
            })
    };
    let diameter = resolve(args.diameter, "rotor_diameter", "--diameter")?;
    let inlet = resolve(args.inlet_velocity, "inlet_velocity", "--inlet-velocity")?;
    let component = args
        .component
        .single()
        .ok_or_else(|| Error::Argument("profile takes a single component, u or v".into()))?;

    let u = load_component(&args.input, Component::Streamwise, args.dt)?;
    let profiled = if component == Component::Streamwise {
        u.clone()
    } else {
        load_component(&args.input, component, args.dt)?
    };
    let profile_mean = metrics::time_average(&profiled);
    let profile = metrics::profile_at_station(
        profile_mean.as_slice(),
        profiled.grid(),
        component,
        diameter,
        args.station,
    )?;
    let stats = metrics::deficit_stats(&profile, inlet)?;
    let u_mean = metrics::time_average(&u);
    let collapse = metrics::collapse_length(
        u_mean.as_slice(),
        u.grid(),
        inlet,
        diameter,
        args.collapse_threshold,
    )?;

    let _lock = OutputLock::acquire(out)?;
    export::write_profile_csv(&profile, &out.join("profile.csv"))?;
    export::write_json(
        &json!({
            "station_x_over_D": profile.station_x_over_d,
            "component": component,
            "rotor_diameter": diameter,
            "inlet_velocity": inlet,
            "max_deficit_fraction": stats.max_deficit_fraction,
            "half_deficit_width_over_D": stats.half_deficit_width_over_d,
        }),
        &out.join("profile.json"),
    )?;
    export::write_json(&collapse, &out.join("collapse.json"))?;
    if cli.svg {
        let svg = export::line_chart_svg(
            &format!("Mean {} at x = {} D", component, args.station),
            "mean velocity (m/s)",
            "y / D",
            &[Curve {
                label: component.label(),
                points: profile
                    .mean_velocity
                    .iter()
                    .copied()
                    .zip(profile.y_over_d.iter().copied())
                    .collect(),
            }],
        );
        export::write_svg(&svg, &out.join("profile.svg"))?;
    }
    export::write_json(&provenance("profile", args), &out.join(META_FILE))
}

fn decompose_prepared(prep: &Prepared, algorithm: Algorithm) -> Result<PodResult> {
    let (n, m) = prep.matrix.shape();
    pod::decompose(&prep.matrix, algorithm.resolve(n, m))
}

fn cmd_compare(cli: &Cli, args: &CompareArgs) -> Result<()> {
    let out = output_dir(cli)?;
    if args.modes == 0 {
        return Err(Error::Argument("--modes must be at least 1".into()));
    }
    let a = prepare(&args.a, &args.matrix)?;
    let b = prepare(&args.b, &args.matrix)?;
    if !a.grid.same_layout(&b.grid) {
        let (expected, actual) = if a.grid.nx() != b.grid.nx() {
            (a.grid.nx(), b.grid.nx())
        } else if a.grid.ny() != b.grid.ny() {
            (a.grid.ny(), b.grid.ny())
        } else {
            (a.grid.n_points(), b.grid.n_points())
        };
        return Err(Error::dimension(
            "grid of dataset b (the compared grids must coincide)",
            expected,
            actual,
        ));
    }
    let _lock = OutputLock::acquire(out)?;
    let ra = decompose_prepared(&a, args.matrix.algorithm)?;
    let rb = decompose_prepared(&b, args.matrix.algorithm)?;
    let report = compare::compare(
        &ra,
        &rb,
        &CompareOptions {
            leading_modes: args.modes,
            mac_floor: args.mac_floor,
            energy_threshold: args.threshold,
        },
    )?;
    export::write_json(&report, &out.join("report.json"))?;
    export::write_mac_csv(&report.mac_matrix(), &out.join("mac.csv"))?;
    if cli.svg {
        let svg = export::line_chart_svg(
            "Cumulative POD energy",
            "mode number",
            "cumulative energy fraction",
            &[
                Curve {
                    label: "a",
                    points: export::cumulative_energy_curve(&ra),
                },
                Curve {
                    label: "b",
                    points: export::cumulative_energy_curve(&rb),
                },
            ],
        );
        export::write_svg(&svg, &out.join("energy.svg"))?;
    }
    export::write_json(&provenance("compare", args), &out.join(META_FILE))
}

fn cmd_info(cli: &Cli, args: &InfoArgs) -> Result<()> {
    let presets: Vec<Value> = Preset::ALL
        .iter()
        .map(|p| {
            let params = p.params();
            json!({
                "name": p.name(),
                "tip_speed_ratio": params.operating_point.tsr(),
                "params": params,
            })
        })
        .collect();
    let dataset = match &args.input {
        Some(dir) => {
            require_dir(dir)?;
            Some(read_meta(dir)?.to_json())
        }
        None => None,
    };
    let info = json!({
        "tool": "wakepod",
        "version": env!("CARGO_PKG_VERSION"),
        "config": {
            "out": cli.out,
            "seed": cli.seed,
            "threads": cli.threads,
            "svg": cli.svg,
        },
        "defaults": {
            "station_x_over_D": DEFAULT_STATION,
            "collapse_threshold": DEFAULT_COLLAPSE_THRESHOLD,
            "mac_floor": DEFAULT_MAC_FLOOR,
            "rank_tolerance": pod::RANK_EPS,
        },
        "presets": presets,
        "dataset": dataset,
    });
    let text = serde_json::to_string_pretty(&info).expect("info serializes");
    println!("{text}");
    if let Some(out) = &cli.out {
        let _lock = OutputLock::acquire(out)?;
        export::write_json(&info, &out.join("info.json"))?;
    }
    Ok(())
}
