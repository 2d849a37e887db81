//! Proper orthogonal decomposition of a snapshot matrix.
//!
//! The snapshot matrix `X` (`n` grid points by `m` snapshots) is factored as
//! `X = Phi * Sigma * V^T`. Columns of `Phi` are the spatial modes, `Sigma`
//! holds the singular values in non-increasing order and the rows of
//! `Sigma * V^T` are the temporal coefficients of each mode.
//!
//! Two routes are provided: [`pod_direct`] runs a thin SVD on `X` itself and
//! [`pod_snapshots`] eigendecomposes the `m x m` Gram matrix `X^T X`, which is
//! much cheaper when `n >> m`.
//!
//! Every result follows one sign rule: the entry of largest magnitude in each
//! mode is positive (first such entry on ties), and the coefficient row carries
//! the compensating sign. Comparisons of coefficient phase between two
//! decompositions are only meaningful under this rule.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SnapshotSeries;

/// Modes with `sigma_k <= RANK_EPS * sigma_1` are dropped by [`pod_snapshots`].
pub const RANK_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PodResult {
    modes: DMatrix<f64>,
    singular_values: Vec<f64>,
    coefficients: DMatrix<f64>,
    energy_fractions: Vec<f64>,
    total_energy: f64,
    n_points: usize,
    n_snapshots: usize,
}

impl PodResult {
    /// `n_points x r`, orthonormal columns.
    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> DVector<f64> {
        self.modes.column(k).into_owned()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `r x n_snapshots`; row `k` is the time evolution of mode `k`.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// `sigma_k^2` over the total energy of the decomposed matrix.
    pub fn energy_fractions(&self) -> &[f64] {
        &self.energy_fractions
    }

    /// Sum of `sigma_j^2` over every singular value of the input, retained or not.
    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_snapshots(&self) -> usize {
        self.n_snapshots
    }

    pub fn is_empty(&self) -> bool {
        self.rank() == 0
    }
}

/// Which factorization route to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Direct,
    Snapshots,
    /// Snapshots when `m <= n`, direct otherwise.
    Auto,
}

impl Algorithm {
    /// The concrete route chosen for an `n x m` input.
    pub fn resolve(self, n: usize, m: usize) -> Algorithm {
        match self {
            Algorithm::Auto if m <= n => Algorithm::Snapshots,
            Algorithm::Auto => Algorithm::Direct,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Direct => "direct",
            Algorithm::Snapshots => "snapshots",
            Algorithm::Auto => "auto",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Algorithm::Direct),
            "snapshots" => Ok(Algorithm::Snapshots),
            "auto" => Ok(Algorithm::Auto),
            other => Err(Error::Argument(format!(
                "unknown algorithm `{other}` (expected direct, snapshots or auto)"
            ))),
        }
    }
}

/// The snapshot matrix of a series: entry `(p, t)` is the value at point `p`, snapshot `t`.
pub fn assemble_snapshot_matrix(series: &SnapshotSeries) -> DMatrix<f64> {
    series.data().clone()
}

/// Stacks the streamwise and transversal snapshot matrices into one `2n x m`
/// matrix for a coupled (vector) decomposition.
pub fn assemble_vector_matrix(u: &SnapshotSeries, v: &SnapshotSeries) -> Result<DMatrix<f64>> {
    if !u.grid().same_layout(v.grid()) {
        return Err(Error::Argument(
            "vector POD needs both components on the same grid".into(),
        ));
    }
    if u.n_snapshots() != v.n_snapshots() {
        return Err(Error::dimension(
            "snapshots per component",
            u.n_snapshots(),
            v.n_snapshots(),
        ));
    }
    let (n, m) = (u.n_points(), u.n_snapshots());
    let mut x = DMatrix::zeros(2 * n, m);
    x.rows_mut(0, n).copy_from(u.data());
    x.rows_mut(n, n).copy_from(v.data());
    Ok(x)
}

/// Runs the requested algorithm.
pub fn decompose(x: &DMatrix<f64>, algorithm: Algorithm) -> Result<PodResult> {
    match algorithm.resolve(x.nrows(), x.ncols()) {
        Algorithm::Snapshots => pod_snapshots(x),
        _ => pod_direct(x),
    }
}

fn validate(x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Argument(format!(
            "snapshot matrix must be non-empty, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let n = x.nrows();
    match x.as_slice().iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFinite {
            snapshot: k / n,
            point: k % n,
        }),
        None => Ok(()),
    }
}

/// Index order that sorts `values` descending; equal values keep their order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Makes the largest-magnitude entry of each mode positive, flipping the
/// matching coefficient row along with it.
fn apply_sign_convention(modes: &mut DMatrix<f64>, coefficients: &mut DMatrix<f64>) {
    for k in 0..modes.ncols() {
        let mut col = modes.column_mut(k);
        let mut pivot = 0.0_f64;
        for &v in col.iter() {
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        if pivot < 0.0 {
            col.neg_mut();
            coefficients.row_mut(k).neg_mut();
        }
    }
}

fn fractions(singular_values: &[f64], total: f64) -> Vec<f64> {
    singular_values
        .iter()
        .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
        .collect()
}

/// POD through a thin SVD of the snapshot matrix.
///
/// Returns all `min(n, m)` singular triplets, including numerically zero ones.
pub fn pod_direct(x: &DMatrix<f64>) -> Result<PodResult> {
    validate(x)?;
    let (n, m) = x.shape();
    let k = n.min(m);
    let svd = to_faer(x)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD of {n}x{m} matrix failed: {e:?}")))?;
    let u = from_faer(svd.U());
    let v = from_faer(svd.V());
    let sigma = DVector::from_fn(k, |i, _| svd.S()[i]);

    let order = descending_order(sigma.as_slice());
    let singular_values: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let mut modes = DMatrix::zeros(n, k);
    let mut coefficients = DMatrix::zeros(k, m);
    for (dst, &src) in order.iter().enumerate() {
        modes.set_column(dst, &u.column(src));
        coefficients.set_row(dst, &(v.column(src).transpose() * sigma[src]));
    }
    apply_sign_convention(&mut modes, &mut coefficients);

    let total_energy: f64 = singular_values.iter().map(|s| s * s).sum();
    Ok(PodResult {
        energy_fractions: fractions(&singular_values, total_energy),
        modes,
        singular_values,
        coefficients,
        total_energy,
        n_points: n,
        n_snapshots: m,
    })
}

/// POD by the method of snapshots.
///
/// Eigenvectors `v_k` of `X^T X` give `sigma_k = |X v_k|` and modes
/// `X v_k / sigma_k`. Taking `sigma_k` from the norm rather than from the
/// square root of the eigenvalue keeps small singular values accurate down to
/// roughly `eps * sigma_1`, so the [`RANK_EPS`] cutoff is meaningful. The modes
/// then get two classical Gram-Schmidt passes to restore orthonormality lost to
/// the squared condition number, and the coefficients are `Phi^T X`.
pub fn pod_snapshots(x: &DMatrix<f64>) -> Result<PodResult> {
    validate(x)?;
    let (n, m) = x.shape();
    let total_energy = x.norm_squared();

    let gram = to_faer(&x.tr_mul(x));
    let eig = gram.self_adjoint_eigen(Side::Lower).map_err(|e| {
        Error::Numerical(format!(
            "eigendecomposition of {m}x{m} Gram matrix failed: {e:?}"
        ))
    })?;
    let projected = x * from_faer(eig.U());
    let norms: Vec<f64> = projected.column_iter().map(|c| c.norm()).collect();
    let order = descending_order(&norms);
    let sigma_max = order.first().map(|&i| norms[i]).unwrap_or(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| sigma_max > 0.0 && norms[i] > RANK_EPS * sigma_max)
        .collect();

    let r = kept.len();
    let mut modes = DMatrix::zeros(n, r);
    for (dst, &src) in kept.iter().enumerate() {
        modes.set_column(dst, &(projected.column(src) / norms[src]));
    }
    reorthonormalize(&mut modes);
    let mut coefficients = modes.tr_mul(x);
    apply_sign_convention(&mut modes, &mut coefficients);

    let singular_values: Vec<f64> = kept.iter().map(|&i| norms[i]).collect();
    Ok(PodResult {
        energy_fractions: fractions(&singular_values, total_energy),
        modes,
        singular_values,
        coefficients,
        total_energy,
        n_points: n,
        n_snapshots: m,
    })
}

pub(crate) fn to_faer(x: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

pub(crate) fn from_faer(x: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

/// Two passes of classical Gram-Schmidt against the preceding columns.
fn reorthonormalize(q: &mut DMatrix<f64>) {
    for k in 0..q.ncols() {
        for _ in 0..2 {
            if k > 0 {
                let (head, mut rest) = q.columns_range_pair_mut(0..k, k..);
                let mut col = rest.column_mut(0);
                let h = head.tr_mul(&col);
                col.gemv(-1.0, &head, &h, 1.0);
            }
        }
        let norm = q.column(k).norm();
        if norm > 0.0 {
            q.column_mut(k).unscale_mut(norm);
        }
    }
}

/// Running sum of the energy fractions.
pub fn cumulative_energy(result: &PodResult) -> Vec<f64> {
    result
        .energy_fractions
        .iter()
        .scan(0.0, |acc, f| {
            *acc += f;
            Some(*acc)
        })
        .collect()
}

/// Slack on cumulative-energy comparisons, absorbing rounding in the partial sums.
pub const ENERGY_SLACK: f64 = 1e-12;

/// Smallest `k` whose cumulative energy reaches `threshold` (within
/// [`ENERGY_SLACK`]); the full rank if it never does.
pub fn effective_mode_count(result: &PodResult, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Argument(format!(
            "energy threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let curve = cumulative_energy(result);
    Ok(curve
        .iter()
        .position(|&c| c >= threshold - ENERGY_SLACK)
        .map_or(result.rank(), |k| k + 1))
}

/// Keeps the leading `r_keep` modes. Energy fractions stay relative to the
/// energy of the full decomposition.
pub fn truncate(result: &PodResult, r_keep: usize) -> Result<PodResult> {
    if r_keep == 0 || r_keep > result.rank() {
        return Err(Error::Argument(format!(
            "cannot keep {r_keep} modes of a rank-{} decomposition",
            result.rank()
        )));
    }
    Ok(PodResult {
        modes: result.modes.columns(0, r_keep).into_owned(),
        singular_values: result.singular_values[..r_keep].to_vec(),
        coefficients: result.coefficients.rows(0, r_keep).into_owned(),
        energy_fractions: result.energy_fractions[..r_keep].to_vec(),
        total_energy: result.total_energy,
        n_points: result.n_points,
        n_snapshots: result.n_snapshots,
    })
}

/// `modes * coefficients`, the snapshot matrix seen through the retained modes.
pub fn reconstruct(result: &PodResult) -> DMatrix<f64> {
    if result.is_empty() {
        return DMatrix::zeros(result.n_points, result.n_snapshots);
    }
    &result.modes * &result.coefficients
}

/// `|a - b|_F / |b|_F`, or the absolute norm when `b` is zero.
pub fn relative_frobenius_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
