//! Diagonal penalty matrix built from a forest over the hypotheses.
//!
//! Each hypothesis points at its most correlated peer when that peer is at
//! least as good and at least half correlated; otherwise it is its own root.
//! Non-root hypotheses are penalised by `max(g) · z(i, root) · g(root)`.

/// Threshold on `z` for linking a hypothesis to its most correlated peer.
pub const EDGE_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyMatrix {
    /// Diagonal of `P`.
    pub diag: Vec<f64>,
    /// Edge target of each node (self for roots of the raw graph).
    pub parent: Vec<usize>,
    /// Root reached from each node after cycle cutting.
    pub root: Vec<usize>,
}

pub fn build_penalty(z: &[Vec<f64>], g: &[f64]) -> PenaltyMatrix {
    let m = g.len();
    let g_max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        let best = (0..m)
            .filter(|&j| j != i)
            .fold(None, |best: Option<usize>, j| match best {
                Some(k) if z[i][k] >= z[i][j] => Some(k),
                _ => Some(j),
            });
        if let Some(k) = best {
            if g[k] >= g[i] && z[i][k] >= EDGE_THRESHOLD {
                parent[i] = k;
            }
        }
    }

    // Equal goodness can produce cycles; the smallest index on a cycle
    // becomes its root.
    let mut effective = parent.clone();
    let mut state = vec![0u8; m]; // 0 unseen, 1 on current path, 2 done
    for start in 0..m {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = effective[v];
        }
        if state[v] == 1 {
            let cycle_start = path.iter().position(|&p| p == v).unwrap();
            let cycle = &path[cycle_start..];
            if cycle.len() > 1 {
                let min = *cycle.iter().min().unwrap();
                effective[min] = min;
            }
        }
        for &p in &path {
            state[p] = 2;
        }
    }

    let mut root = vec![usize::MAX; m];
    for i in 0..m {
        let mut v = i;
        let mut path = Vec::new();
        while root[v] == usize::MAX && effective[v] != v {
            path.push(v);
            v = effective[v];
        }
        let r = if root[v] == usize::MAX { v } else { root[v] };
        root[v] = r;
        for p in path {
            root[p] = r;
        }
    }

    let diag = (0..m)
        .map(|i| {
            let r = root[i];
            if r == i {
                0.0
            } else {
                g_max * (z[i][r] * g[r])
            }
        })
        .collect();
    PenaltyMatrix { diag, parent, root }
}

/// `Q = max(g) · Z + diag(P)`.
pub fn assemble_q(z: &[Vec<f64>], p: &PenaltyMatrix, g: &[f64]) -> Vec<Vec<f64>> {
    let g_max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    z.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(k, &v)| g_max * v + if i == k { p.diag[i] } else { 0.0 })
                .collect()
        })
        .collect()
}
