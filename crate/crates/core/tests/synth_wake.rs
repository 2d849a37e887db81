use nalgebra::DMatrix;
use proptest::prelude::*;
use wakepod::compare::mac_matrix;
use wakepod::field::{Component, SnapshotSeries, StructuredGrid};
use wakepod::pod::{assemble_snapshot_matrix, cumulative_energy, decompose, Algorithm, RANK_EPS};
use wakepod::synth::{
    default_grid, fidelity_filter, generate, vortex_count, vortex_count_bound, Preset,
    SyntheticWakeParams, ROTOR_DIAMETER,
};

fn quiet(mut p: SyntheticWakeParams) -> SyntheticWakeParams {
    p.noise_amplitude = 0.0;
    p
}

/// Grid with exactly `x = 6 D` and `y = 0` among its nodes.
fn centerline_grid() -> StructuredGrid {
    let d = ROTOR_DIAMETER;
    StructuredGrid::spanning(121, 41, 0.0, 12.0 * d, -2.0 * d, 4.0 * d).unwrap()
}

fn plain_time_mean(s: &SnapshotSeries, p: usize) -> f64 {
    (0..s.n_snapshots()).map(|t| s.frame(t)[p]).sum::<f64>() / s.n_snapshots() as f64
}

#[test]
fn steady_field_has_one_mode() {
    let mut params = quiet(Preset::Tsr24.params());
    params.vortex_strength = 0.0;
    let grid = default_grid(&params, 32, 16).unwrap();
    let (u, v) = generate(&params, &grid, 12, 0.01).unwrap();
    for t in 1..12 {
        assert_eq!(u.frame(t), u.frame(0));
    }
    assert!(v.data().iter().all(|&x| x == 0.0));
    let x = assemble_snapshot_matrix(&u);
    assert_eq!(decompose(&x, Algorithm::Snapshots).unwrap().rank(), 1);
    // the direct route keeps every triplet; only one is above the rank floor
    let direct = decompose(&x, Algorithm::Direct).unwrap();
    let s = direct.singular_values();
    assert_eq!(s.iter().filter(|&&v| v > RANK_EPS * s[0]).count(), 1);
    assert!((s[0] - x.norm()).abs() <= 1e-12 * x.norm());
}

#[test]
fn centerline_mean_matches_closed_form_without_vortices() {
    let mut params = Preset::Tsr24.params();
    params.vortex_strength = 0.0;
    let grid = centerline_grid();
    let (u, _) = generate(&params, &grid, 64, 0.01).unwrap();
    let expected = 9.1 * (1.0 - 0.5 * (-1.0f64).exp());
    let got = plain_time_mean(&u, grid.index(60, 20));
    assert!(
        (got - expected).abs() <= 0.05 * expected,
        "{got} vs {expected}"
    );
}

#[test]
fn centerline_deficit_at_collapse_length_with_vortices() {
    let grid = centerline_grid();
    for preset in Preset::ALL {
        let params = quiet(preset.params());
        let (u, _) = generate(&params, &grid, 256, 0.01).unwrap();
        let i = (params.collapse_length / grid.dx()).round() as usize;
        assert!((grid.x(i) - params.collapse_length).abs() < 1e-9);
        let u_inf = params.operating_point.inlet_velocity;
        let deficit = 1.0 - plain_time_mean(&u, grid.index(i, 20)) / u_inf;
        let expected = 0.5 * (-1.0f64).exp();
        assert!(
            (deficit - expected).abs() <= 0.05 * expected,
            "{preset}: {deficit} vs {expected}"
        );
    }
}

#[test]
fn leading_mode_is_the_time_mean() {
    let params = Preset::Tsr24.params();
    let grid = default_grid(&params, 128, 64).unwrap();
    let (u, _) = generate(&params, &grid, 256, 0.01).unwrap();
    let mean: Vec<f64> = (0..u.n_points()).map(|p| plain_time_mean(&u, p)).collect();
    let r = decompose(&assemble_snapshot_matrix(&u), Algorithm::Auto).unwrap();
    let mac = mac_matrix(
        &r.modes().columns(0, 1).into_owned(),
        &DMatrix::from_column_slice(mean.len(), 1, &mean),
    )
    .unwrap();
    assert!(mac[(0, 0)] >= 0.99, "MAC {}", mac[(0, 0)]);
}

#[test]
fn generation_is_reproducible_across_thread_counts() {
    let params = Preset::Tsr33.params();
    let grid = default_grid(&params, 40, 20).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate(&params, &grid, 24, 0.01).unwrap())
    };
    let (u1, v1) = run(1);
    let (u4, v4) = run(4);
    let bits = |s: &SnapshotSeries| s.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&u1), bits(&u4));
    assert_eq!(bits(&v1), bits(&v4));
    let mut other = params.clone();
    other.seed = 1;
    let (u_other, _) = generate(&other, &grid, 24, 0.01).unwrap();
    assert_ne!(bits(&u_other), bits(&u1));
}

#[test]
fn vortex_population_stays_bounded() {
    for preset in Preset::ALL {
        let params = preset.params();
        let grid = default_grid(&params, 64, 32).unwrap();
        let bound = vortex_count_bound(&params, &grid);
        for k in 0..500 {
            let t = k as f64 * 0.013;
            let n = vortex_count(&params, &grid, t);
            assert!(n > 0 && n <= bound, "{preset} t={t}: {n} > {bound}");
        }
    }
}

#[test]
fn invalid_generation_requests() {
    let params = Preset::Tsr24.params();
    let grid = default_grid(&params, 8, 8).unwrap();
    assert!(generate(&params, &grid, 1, 0.01).is_err());
    assert!(generate(&params, &grid, 4, 0.0).is_err());
    let upstream = StructuredGrid::new(4, 4, 0.1, 0.1, -1.0, 0.0).unwrap();
    assert!(generate(&params, &upstream, 4, 0.01).is_err());
    let mut bad = params.clone();
    bad.deficit_amplitude = 1.5;
    assert!(generate(&bad, &grid, 4, 0.01).is_err());
}

/// Direct 2D box average, mirroring out-of-range indices one at a time.
fn box_oracle(frame: &[f64], nx: usize, ny: usize, k: usize) -> Vec<f64> {
    fn reflect(mut i: i64, n: i64) -> usize {
        loop {
            if i < 0 {
                i = -i - 1;
            } else if i >= n {
                i = 2 * n - 1 - i;
            } else {
                return i as usize;
            }
        }
    }
    let k = k as i64;
    let w = ((2 * k + 1) * (2 * k + 1)) as f64;
    let mut out = vec![0.0; frame.len()];
    for j in 0..ny as i64 {
        for i in 0..nx as i64 {
            let mut acc = 0.0;
            for dj in -k..=k {
                for di in -k..=k {
                    acc += frame[reflect(j + dj, ny as i64) * nx + reflect(i + di, nx as i64)];
                }
            }
            out[j as usize * nx + i as usize] = acc / w;
        }
    }
    out
}

fn noise_series(nx: usize, ny: usize, m: usize, seed: u64) -> SnapshotSeries {
    use rand::{Rng, SeedableRng};
    let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = StructuredGrid::new(nx, ny, 1.0, 1.0, 0.0, 0.0).unwrap();
    let data = DMatrix::from_fn(nx * ny, m, |_, _| g.random_range(-1.0..1.0));
    SnapshotSeries::new(grid, Component::Transversal, 0.1, data).unwrap()
}

#[test]
fn filter_radius_zero_is_identity() {
    let s = noise_series(9, 7, 3, 1);
    assert_eq!(fidelity_filter(&s, 0), s);
}

#[test]
fn filter_keeps_constants() {
    let grid = StructuredGrid::new(6, 5, 1.0, 1.0, 0.0, 0.0).unwrap();
    let s = SnapshotSeries::new(
        grid,
        Component::Streamwise,
        1.0,
        DMatrix::from_element(30, 2, 4.25),
    )
    .unwrap();
    for k in [1, 2, 5, 9] {
        let f = fidelity_filter(&s, k);
        assert!(
            f.data().iter().all(|&x| (x - 4.25).abs() <= 1e-14),
            "radius {k}"
        );
    }
}

#[test]
fn filter_reduces_white_noise_variance() {
    let s = noise_series(40, 30, 5, 2);
    let f = fidelity_filter(&s, 2);
    let variance = |x: &[f64]| {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64
    };
    for t in 0..5 {
        assert!(variance(f.frame(t)) < variance(s.frame(t)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filter_matches_direct_box_average(nx in 1usize..12, ny in 1usize..12, k in 0usize..6, seed in any::<u64>()) {
        let s = noise_series(nx, ny, 2, seed);
        let f = fidelity_filter(&s, k);
        for t in 0..2 {
            let oracle = box_oracle(s.frame(t), nx, ny, k);
            for (a, b) in f.frame(t).iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn filter_preserves_spatial_mean(nx in 1usize..20, ny in 1usize..20, k in 0usize..8, seed in any::<u64>()) {
        let s = noise_series(nx, ny, 3, seed);
        let f = fidelity_filter(&s, k);
        for t in 0..3 {
            let before: f64 = s.frame(t).iter().sum::<f64>() / s.n_points() as f64;
            let after: f64 = f.frame(t).iter().sum::<f64>() / s.n_points() as f64;
            let scale = s.frame(t).iter().map(|v| v.abs()).sum::<f64>() / s.n_points() as f64;
            prop_assert!((before - after).abs() <= 1e-12 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn filtered_energy_dominates_raw(
        preset in prop::sample::select(Preset::ALL.to_vec()),
        seed in 0u64..1000,
        radius in 1usize..4,
    ) {
        let mut params = preset.params();
        params.seed = seed;
        let grid = default_grid(&params, 48, 24).unwrap();
        let (u, v) = generate(&params, &grid, 32, 0.01).unwrap();
        for s in [&u, &v] {
            let raw = decompose(&assemble_snapshot_matrix(s), Algorithm::Auto).unwrap();
            let filtered = decompose(&assemble_snapshot_matrix(&fidelity_filter(s, radius)), Algorithm::Auto).unwrap();
            let (cr, cf) = (cumulative_energy(&raw), cumulative_energy(&filtered));
            for k in 0..cr.len().min(cf.len()) {
                prop_assert!(cf[k] >= cr[k] - 1e-9, "{} mode {}: {} < {}", s.component(), k + 1, cf[k], cr[k]);
            }
        }
    }
}
