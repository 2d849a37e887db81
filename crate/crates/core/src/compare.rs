//! Comparison of two decompositions computed on the same grid: modal
//! assurance criterion, greedy mode matching, principal angles between the
//! leading subspaces and dominance of the cumulative energy curves.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pod::{cumulative_energy, effective_mode_count, to_faer, PodResult};

/// Matches scoring below this MAC are not reported.
pub const DEFAULT_MAC_FLOOR: f64 = 0.25;
/// Slack when comparing cumulative energy curves point by point.
pub const DOMINANCE_SLACK: f64 = 1e-9;

/// `MAC(i, j) = (a_i . b_j)^2 / (|a_i|^2 |b_j|^2)` for every pair of columns.
pub fn mac_matrix(modes_a: &DMatrix<f64>, modes_b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if modes_a.nrows() != modes_b.nrows() {
        return Err(Error::dimension(
            "points per mode",
            modes_a.nrows(),
            modes_b.nrows(),
        ));
    }
    let norms = |m: &DMatrix<f64>| -> Result<Vec<f64>> {
        m.column_iter()
            .enumerate()
            .map(|(k, c)| {
                let n = c.dot(&c);
                if n > 0.0 {
                    Ok(n)
                } else {
                    Err(Error::DegenerateMode(k))
                }
            })
            .collect()
    };
    let na = norms(modes_a)?;
    let nb = norms(modes_b)?;
    Ok(DMatrix::from_fn(
        modes_a.ncols(),
        modes_b.ncols(),
        |i, j| {
            let d = modes_a.column(i).dot(&modes_b.column(j));
            (d * d / (na[i] * nb[j])).clamp(0.0, 1.0)
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMatch {
    pub mode_a: usize,
    pub mode_b: usize,
    pub mac: f64,
}

/// Greedy one-to-one pairing by descending MAC, ties to the lower `i` then the
/// lower `j`. Pairs scoring below `floor` are never matched.
pub fn match_modes(mac: &DMatrix<f64>, floor: f64) -> Vec<ModeMatch> {
    let mut candidates: Vec<ModeMatch> = (0..mac.nrows())
        .flat_map(|i| (0..mac.ncols()).map(move |j| (i, j)))
        .filter(|&(i, j)| mac[(i, j)] >= floor)
        .map(|(i, j)| ModeMatch {
            mode_a: i,
            mode_b: j,
            mac: mac[(i, j)],
        })
        .collect();
    candidates.sort_by(|p, q| {
        q.mac
            .total_cmp(&p.mac)
            .then(p.mode_a.cmp(&q.mode_a))
            .then(p.mode_b.cmp(&q.mode_b))
    });
    let mut used_a = vec![false; mac.nrows()];
    let mut used_b = vec![false; mac.ncols()];
    let mut matches = Vec::new();
    for c in candidates {
        if !used_a[c.mode_a] && !used_b[c.mode_b] {
            used_a[c.mode_a] = true;
            used_b[c.mode_b] = true;
            matches.push(c);
        }
    }
    matches
}

/// Principal angles between the column spans of two orthonormal bases, in
/// radians, smallest first.
pub fn subspace_angles(modes_a: &DMatrix<f64>, modes_b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if modes_a.nrows() != modes_b.nrows() {
        return Err(Error::dimension(
            "points per mode",
            modes_a.nrows(),
            modes_b.nrows(),
        ));
    }
    if modes_a.ncols() == 0 || modes_b.ncols() == 0 {
        return Ok(Vec::new());
    }
    let cross = to_faer(&modes_a.tr_mul(modes_b));
    let singular = cross
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD of the basis cross product failed: {e:?}")))?;
    let mut angles: Vec<f64> = singular.iter().map(|s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    ADominates,
    BDominates,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparison {
    pub energy_curve_a: Vec<f64>,
    pub energy_curve_b: Vec<f64>,
    /// Number of leading indices compared, `min(r_a, r_b)`.
    pub compared_modes: usize,
    pub dominance: Dominance,
    /// Smallest lead of the dominating curve over the other (0 for a tie or mixed).
    pub margin: f64,
    /// 1-based mode number where the leading curve first changes, for mixed verdicts.
    pub first_crossing_mode: Option<usize>,
    pub threshold: f64,
    pub effective_modes_a: usize,
    pub effective_modes_b: usize,
}

/// Point-by-point comparison of cumulative energy curves over the indices both
/// decompositions share. Curves equal within [`DOMINANCE_SLACK`] everywhere
/// count as `a` dominating with zero margin.
pub fn compare_energy(
    result_a: &PodResult,
    result_b: &PodResult,
    threshold: f64,
) -> Result<EnergyComparison> {
    if result_a.is_empty() || result_b.is_empty() {
        return Err(Error::Argument(
            "energy comparison needs two non-empty decompositions".into(),
        ));
    }
    let curve_a = cumulative_energy(result_a);
    let curve_b = cumulative_energy(result_b);
    let k = curve_a.len().min(curve_b.len());
    let diffs: Vec<f64> = (0..k).map(|i| curve_a[i] - curve_b[i]).collect();

    let (dominance, margin, first_crossing_mode) = if diffs.iter().all(|&d| d >= -DOMINANCE_SLACK) {
        let m = diffs.iter().copied().fold(f64::INFINITY, f64::min);
        (Dominance::ADominates, m.max(0.0), None)
    } else if diffs.iter().all(|&d| d <= DOMINANCE_SLACK) {
        let m = diffs.iter().map(|d| -d).fold(f64::INFINITY, f64::min);
        (Dominance::BDominates, m.max(0.0), None)
    } else {
        let lead = diffs
            .iter()
            .find(|d| d.abs() > DOMINANCE_SLACK)
            .map_or(0.0, |d| d.signum());
        let crossing = diffs
            .iter()
            .position(|&d| d.abs() > DOMINANCE_SLACK && d.signum() != lead)
            .map(|i| i + 1);
        (Dominance::Mixed, 0.0, crossing)
    };

    Ok(EnergyComparison {
        effective_modes_a: effective_mode_count(result_a, threshold)?,
        effective_modes_b: effective_mode_count(result_b, threshold)?,
        energy_curve_a: curve_a,
        energy_curve_b: curve_b,
        compared_modes: k,
        dominance,
        margin,
        first_crossing_mode,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Leading modes of each decomposition entering the MAC and subspace angles.
    pub leading_modes: usize,
    pub mac_floor: f64,
    /// Energy threshold for the effective mode counts.
    pub energy_threshold: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            leading_modes: 10,
            mac_floor: DEFAULT_MAC_FLOOR,
            energy_threshold: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `r_a x r_b`, row-major.
    pub mac: Vec<Vec<f64>>,
    pub matches: Vec<ModeMatch>,
    pub principal_angles: Vec<f64>,
    #[serde(flatten)]
    pub energy: EnergyComparison,
}

impl ComparisonReport {
    pub fn mac_matrix(&self) -> DMatrix<f64> {
        let rows = self.mac.len();
        let cols = self.mac.first().map_or(0, Vec::len);
        DMatrix::from_fn(rows, cols, |i, j| self.mac[i][j])
    }
}

/// Full comparison of two decompositions of the same grid.
pub fn compare(
    result_a: &PodResult,
    result_b: &PodResult,
    options: &CompareOptions,
) -> Result<ComparisonReport> {
    if result_a.n_points() != result_b.n_points() {
        return Err(Error::dimension(
            "grid points of the compared decompositions",
            result_a.n_points(),
            result_b.n_points(),
        ));
    }
    let energy = compare_energy(result_a, result_b, options.energy_threshold)?;
    let ka = options.leading_modes.min(result_a.rank());
    let kb = options.leading_modes.min(result_b.rank());
    let lead_a = result_a.modes().columns(0, ka).into_owned();
    let lead_b = result_b.modes().columns(0, kb).into_owned();
    let mac = mac_matrix(&lead_a, &lead_b)?;
    let k = ka.min(kb);
    let angles = subspace_angles(
        &lead_a.columns(0, k).into_owned(),
        &lead_b.columns(0, k).into_owned(),
    )?;
    Ok(ComparisonReport {
        matches: match_modes(&mac, options.mac_floor),
        mac: mac
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        principal_angles: angles,
        energy,
    })
}
