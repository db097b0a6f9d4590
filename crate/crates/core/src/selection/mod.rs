//! Model selection: goodness scores, inlier-list similarity, and the greedy
//! and quadratic-program selectors.

mod footrule;
mod greedy;
mod penalty;
mod prune;
mod qp;

pub use footrule::{build_similarity, spearman_footrule, HypothesisSimilarity, InlierLists};
pub use greedy::greedy_select;
pub use penalty::{assemble_q, build_penalty, PenaltyMatrix};
pub use prune::prune_explained;
pub use qp::{qp_select, solve_box_qp, suppress_correlated, QpOptions, QpSolution};

/// Floor applied to σ̂ before dividing by it.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Goodness of one hypothesis plus whether the closest-outlier window had to
/// be truncated at the end of the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Goodness {
    pub value: f64,
    pub truncated: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `median(d[1..t]) / median(d[t+1..t+β]) / σ̂` over densities in sorted
/// residual order.
///
/// When `t + β` runs past the end, the outlier window is cut to whatever is
/// left and the result is flagged; with nothing left the ratio is taken as 1.
pub fn goodness_score(sorted_density: &[f64], t: usize, sigma_hat: f64, beta: usize) -> Goodness {
    let n = sorted_density.len();
    let t = t.clamp(1, n);
    let end = t + beta;
    let truncated = end > n;
    let inlier = median(&mut sorted_density[..t].to_vec());
    let ratio = if t < n {
        let outlier = median(&mut sorted_density[t..end.min(n)].to_vec());
        if outlier > 0.0 {
            inlier / outlier
        } else {
            f64::MAX
        }
    } else {
        1.0
    };
    Goodness {
        value: ratio / sigma_hat.max(SIGMA_FLOOR),
        truncated,
    }
}
