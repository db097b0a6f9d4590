//! Kernel residual density (KRD) and the preference orderings built on it.
//!
//! For a hypothesis with sorted residuals `ρ¹ ≤ … ≤ ρⁿ`, the density at sorted
//! position `j` uses the variable bandwidth `b = ρʲ`:
//!
//! ```text
//! d = (1/n) Σ_k (1/b) K((ρʲ − ρᵏ) / b)
//! ```
//!
//! so every point with a smaller residual contributes, and a hypothesis with a
//! dense inlier band gets a single dominant density peak near zero residual.

use std::cmp::Ordering;

/// Default number of top preferences compared by [`point_correlation`].
pub const DEFAULT_TOP_T: usize = 5;

/// Epanechnikov kernel `3/4 (1 − u²)` on `|u| ≤ 1`.
#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Smallest admissible bandwidth for a residual row whose largest entry is
/// `max_residual`.
#[inline]
pub fn bandwidth_floor(max_residual: f64) -> f64 {
    (1e-9 * max_residual).max(1e-12)
}

/// Residuals of one hypothesis sorted ascending, with the point permutation
/// (the hypothesis' residual preference).
#[derive(Clone, Debug, PartialEq)]
pub struct SortedResidualProfile {
    /// `rho[k]` is the k-th smallest residual.
    pub rho: Vec<f64>,
    /// `order[k]` is the point holding `rho[k]`.
    pub order: Vec<usize>,
}

impl SortedResidualProfile {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// `rank[j]` is the sorted position of point `j`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.order.len()];
        for (pos, &j) in self.order.iter().enumerate() {
            rank[j] = pos;
        }
        rank
    }
}

/// Sorts a residual row ascending; ties keep ascending point index.
pub fn hypothesis_preference(row: &[f64]) -> SortedResidualProfile {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    let rho = order.iter().map(|&j| row[j]).collect();
    SortedResidualProfile { rho, order }
}

/// KRD of every point, indexed by point (not by sorted position).
pub fn kernel_residual_density(profile: &SortedResidualProfile) -> Vec<f64> {
    let sorted = kernel_residual_density_sorted(&profile.rho);
    let mut out = vec![0.0; sorted.len()];
    for (pos, &j) in profile.order.iter().enumerate() {
        out[j] = sorted[pos];
    }
    out
}

/// KRD along sorted positions of an ascending residual vector.
///
/// Only residuals within one bandwidth of `ρʲ` have nonzero kernel weight, so
/// the sum runs over that window; the terms skipped are exact zeros.
pub fn kernel_residual_density_sorted(rho: &[f64]) -> Vec<f64> {
    let floor = rho.last().map_or(0.0, |&m| bandwidth_floor(m));
    kernel_residual_density_floored(rho, floor)
}

/// [`kernel_residual_density_sorted`] with bandwidth `max(ρʲ, floor)`.
pub fn kernel_residual_density_floored(rho: &[f64], floor: f64) -> Vec<f64> {
    let n = rho.len();
    if n == 0 {
        return Vec::new();
    }
    let floor = floor.max(bandwidth_floor(rho[n - 1]));
    let inv_n = 1.0 / n as f64;
    (0..n)
        .map(|j| {
            let b = rho[j].max(floor);
            // Slightly widened window; entries outside the support add exact zeros.
            let reach = b * (1.0 + 1e-9);
            let lo = rho.partition_point(|&r| r < rho[j] - reach);
            let hi = rho.partition_point(|&r| r <= rho[j] + reach);
            let mut sum = 0.0;
            for &r in &rho[lo..hi] {
                sum += (1.0 / b) * epanechnikov((rho[j] - r) / b);
            }
            inv_n * sum
        })
        .collect()
}

/// Residual row → (sorted profile, KRD row indexed by point).
pub fn krd_row(residuals: &[f64]) -> (SortedResidualProfile, Vec<f64>) {
    let profile = hypothesis_preference(residuals);
    let d = kernel_residual_density(&profile);
    (profile, d)
}

/// Bandwidth floor at the `k`-th smallest residual (1-based).
pub fn rank_bandwidth_floor(rho: &[f64], k: usize) -> f64 {
    match rho.len() {
        0 => 0.0,
        n => rho[k.clamp(1, n) - 1],
    }
}

/// KRD row with every bandwidth raised to at least the `k`-th smallest
/// residual.
///
/// Hypotheses fitted to minimal samples have near-zero residuals at the
/// sample members, so under the plain floor their density is inflated by many
/// orders of magnitude and swamps every density comparison across hypotheses.
pub fn krd_row_floored(residuals: &[f64], k: usize) -> (SortedResidualProfile, Vec<f64>) {
    let profile = hypothesis_preference(residuals);
    let sorted =
        kernel_residual_density_floored(&profile.rho, rank_bandwidth_floor(&profile.rho, k));
    let mut d = vec![0.0; sorted.len()];
    for (pos, &j) in profile.order.iter().enumerate() {
        d[j] = sorted[pos];
    }
    (profile, d)
}

#[inline]
fn density_desc(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Hypotheses ordered by decreasing density at point `j` (ties: lower index).
pub fn point_preference(density_rows: &[Vec<f64>], j: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..density_rows.len()).collect();
    idx.sort_by(|&a, &b| density_desc((a, density_rows[a][j]), (b, density_rows[b][j])));
    idx
}

/// KRD point preferences `vʲ` for every point of an `m × n` density matrix.
pub fn krd_point_preferences(density_rows: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = density_rows.first().map_or(0, Vec::len);
    (0..n).map(|j| point_preference(density_rows, j)).collect()
}

/// First `t` entries of point `j`'s KRD preference, without sorting all `m`.
pub fn top_preferences(density_rows: &[Vec<f64>], j: usize, t: usize) -> Vec<usize> {
    let m = density_rows.len();
    let t = t.min(m);
    let mut idx: Vec<(usize, f64)> = density_rows
        .iter()
        .enumerate()
        .map(|(i, row)| (i, row[j]))
        .collect();
    if t == 0 {
        return Vec::new();
    }
    if t < m {
        idx.select_nth_unstable_by(t - 1, |a, b| density_desc(*a, *b));
        idx.truncate(t);
    }
    idx.sort_by(|a, b| density_desc(*a, *b));
    idx.into_iter().map(|(i, _)| i).collect()
}

/// Fraction of shared entries among the first `t` preferences of two points.
pub fn point_correlation(vi: &[usize], vj: &[usize], t: usize) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let a = &vi[..t.min(vi.len())];
    let b = &vj[..t.min(vj.len())];
    let shared = a.iter().filter(|x| b.contains(x)).count();
    shared as f64 / t as f64
}
