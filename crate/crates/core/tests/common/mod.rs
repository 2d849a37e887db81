//! Test-only oracles. Nothing here calls into the crate's linear algebra, so
//! results computed with these helpers are an independent check on it.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix stored as rows.
///
/// Returns eigenvalues sorted descending and the matching eigenvectors as
/// columns of the returned row-major matrix.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n)
        .map(|r| order.iter().map(|&c| v[r][c]).collect())
        .collect();
    (values, vectors)
}

/// `X^T X` by explicit triple loop.
pub fn gram_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let (n, m) = x.shape();
    (0..m)
        .map(|j| {
            (0..m)
                .map(|k| (0..n).map(|i| x[(i, j)] * x[(i, k)]).sum())
                .collect()
        })
        .collect()
}

/// `u(x, t) = sin(2 pi x / L - 2 pi t / T)` on `n` points covering one
/// wavelength and `m` snapshots covering one period.
pub fn traveling_wave(n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |i, j| {
        let phase_x = 2.0 * PI * i as f64 / n as f64;
        let phase_t = 2.0 * PI * j as f64 / m as f64;
        (phase_x - phase_t).sin()
    })
}

/// Phase of the fundamental (one cycle over the record) of a sampled signal.
pub fn fundamental_phase(signal: &[f64]) -> f64 {
    let m = signal.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (j, s) in signal.iter().enumerate() {
        let w = 2.0 * PI * j as f64 / m;
        re += s * w.cos();
        im -= s * w.sin();
    }
    im.atan2(re)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1)`.
pub fn random_matrix(rng: &mut impl Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
}

/// Sum of squares by plain iteration.
pub fn sum_of_squares(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().map(|v| v * v).sum()
}

/// Largest total score over all one-to-one assignments of rows to columns of a
/// square matrix, by exhaustive enumeration.
pub fn best_assignment(scores: &DMatrix<f64>) -> (f64, Vec<usize>) {
    let n = scores.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (f64::NEG_INFINITY, perm.clone());
    permute(&mut perm, 0, scores, &mut best);
    best
}

fn permute(perm: &mut Vec<usize>, k: usize, scores: &DMatrix<f64>, best: &mut (f64, Vec<usize>)) {
    if k == perm.len() {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| scores[(i, j)]).sum();
        if total > best.0 {
            *best = (total, perm.clone());
        }
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, scores, best);
        perm.swap(k, i);
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}
