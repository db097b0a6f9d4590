/// Walks `ranked` in order and drops every hypothesis whose point set shares
/// at least `max_shared` of its points with the sets already kept.
///
/// `sets[i]` is the point set of hypothesis `i` over points `0..n`. Empty sets are dropped. Returns kept indices in rank order;
/// `max_shared ≥ 1` keeps every nonempty set.
pub fn prune_explained(
    ranked: &[usize],
    sets: &[Vec<usize>],
    n: usize,
    max_shared: f64,
) -> Vec<usize> {
    let mut covered = vec![false; n];
    let mut kept = Vec::new();
    for &i in ranked {
        let set = &sets[i];
        if set.is_empty() {
            continue;
        }
        let shared = set.iter().filter(|&&j| covered[j]).count();
        if max_shared < 1.0 && shared as f64 >= max_shared * set.len() as f64 {
            continue;
        }
        for &j in set {
            covered[j] = true;
        }
        kept.push(i);
    }
    kept
}
