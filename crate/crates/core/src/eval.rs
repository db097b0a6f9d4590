//! Classification accuracy under the best structure-id matching.

use pathfinding::prelude::{kuhn_munkres, Matrix};

/// Percentage of points whose predicted label matches the ground truth after
/// relabelling predicted structures by the best bijection onto true
/// structures. Label 0 (outliers) is never permuted.
pub fn classification_accuracy(pred: &[usize], gt: &[usize]) -> f64 {
    assert_eq!(pred.len(), gt.len(), "label vectors must have equal length");
    let n = pred.len();
    if n == 0 {
        return 100.0;
    }
    let p_max = pred.iter().copied().max().unwrap_or(0);
    let g_max = gt.iter().copied().max().unwrap_or(0);
    let size = p_max.max(g_max).max(1);
    // Confusion counts between structure ids 1..=size; unused ids stay zero.
    let mut counts = Matrix::new(size, size, 0i64);
    let mut outliers_agree = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (0, 0) => outliers_agree += 1,
            (p, g) if p > 0 && g > 0 => counts[(p - 1, g - 1)] += 1,
            _ => {}
        }
    }
    let (matched, _) = kuhn_munkres(&counts);
    100.0 * (matched as usize + outliers_agree) as f64 / n as f64
}
