//! Spearman-Footrule correlation between truncated inlier preference lists.

use rayon::prelude::*;

/// Footrule distance and correlation of two top-`t` lists (equal length `t`).
///
/// Elements missing from one list sit at rank `t + 1` in it, so two disjoint
/// lists have distance `t(t + 1)` and correlation 0.
pub fn spearman_footrule(a: &[usize], b: &[usize]) -> (f64, f64) {
    let t = a.len().min(b.len());
    if t == 0 {
        return (0.0, 0.0);
    }
    let (a, b) = (&a[..t], &b[..t]);
    let missing = t + 1;
    let mut sf = 0usize;
    for (pa, x) in a.iter().enumerate() {
        let pb = b.iter().position(|y| y == x).unwrap_or(missing - 1);
        sf += pa.abs_diff(pb);
    }
    for (pb, y) in b.iter().enumerate() {
        if !a.contains(y) {
            sf += (missing - 1).abs_diff(pb);
        }
    }
    let sf = sf as f64;
    let z = (1.0 - sf / (t * (t + 1)) as f64).clamp(0.0, 1.0);
    (sf, z)
}

/// Full residual preferences plus estimated inlier counts for every
/// hypothesis, with inverse permutations for O(t) footrule evaluation.
#[derive(Clone, Debug)]
pub struct InlierLists {
    orders: Vec<Vec<usize>>,
    ranks: Vec<Vec<usize>>,
    counts: Vec<usize>,
}

impl InlierLists {
    /// `orders[i]` is hypothesis `i`'s full residual preference; its first
    /// `counts[i]` entries are the estimated inliers.
    pub fn new(orders: Vec<Vec<usize>>, counts: Vec<usize>) -> Self {
        assert_eq!(orders.len(), counts.len());
        let ranks = orders
            .iter()
            .map(|o| {
                let mut r = vec![0; o.len()];
                for (pos, &j) in o.iter().enumerate() {
                    r[j] = pos;
                }
                r
            })
            .collect();
        Self {
            orders,
            ranks,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn inliers(&self, i: usize) -> &[usize] {
        &self.orders[i][..self.counts[i]]
    }

    /// Footrule correlation of hypotheses `i` and `k` truncated to
    /// `min(t_i, t_k)`.
    pub fn correlation(&self, i: usize, k: usize) -> f64 {
        let t = self.counts[i].min(self.counts[k]);
        if t == 0 {
            return 0.0;
        }
        let missing = t;
        let (ri, rk) = (&self.ranks[i], &self.ranks[k]);
        let pos = |r: &[usize], j: usize| if r[j] < t { r[j] } else { missing };
        let mut sf = 0usize;
        for &j in &self.orders[i][..t] {
            sf += ri[j].abs_diff(pos(rk, j));
        }
        for &j in &self.orders[k][..t] {
            if ri[j] >= t {
                sf += missing.abs_diff(rk[j]);
            }
        }
        (1.0 - sf as f64 / (t * (t + 1)) as f64).clamp(0.0, 1.0)
    }
}

/// Pairwise correlation matrix `Z` and its thresholded form `B = [Z ≥ δ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSimilarity {
    pub z: Vec<Vec<f64>>,
    pub b: Vec<Vec<bool>>,
    pub delta: f64,
}

pub fn build_similarity(lists: &InlierLists, delta: f64) -> HypothesisSimilarity {
    let m = lists.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i + 1..m).map(|k| lists.correlation(i, k)).collect())
        .collect();
    let mut z = vec![vec![1.0; m]; m];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let k = i + 1 + off;
            z[i][k] = v;
            z[k][i] = v;
        }
    }
    let b = z
        .iter()
        .map(|row| row.iter().map(|&v| v >= delta).collect())
        .collect();
    HypothesisSimilarity { z, b, delta }
}
