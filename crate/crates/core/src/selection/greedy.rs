/// Greedy selection: repeatedly take the best remaining hypothesis and drop
/// every remaining hypothesis similar to it.
///
/// Ties in `g` go to the smaller index. Returns selected indices in pick order.
pub fn greedy_select(g: &[f64], b: &[Vec<bool>]) -> Vec<usize> {
    let m = g.len();
    let mut remaining = vec![true; m];
    let mut left = m;
    let mut selected = Vec::new();
    while left > 0 {
        let k = (0..m)
            .filter(|&i| remaining[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(j) if g[j] >= g[i] => Some(j),
                _ => Some(i),
            })
            .expect("remaining set is nonempty");
        selected.push(k);
        for i in 0..m {
            if remaining[i] && (i == k || b[k][i]) {
                remaining[i] = false;
                left -= 1;
            }
        }
    }
    selected
}
