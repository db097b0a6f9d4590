//! Box-constrained QP `max gᵀy − λ yᵀQy, y ∈ [0, 1]ᵐ` by diagonally scaled
//! projected-gradient ascent with Armijo backtracking.
//!
//! Each coordinate's gradient is scaled by the inverse curvature
//! `1 / (λ (Q_ii + Q_ii))`, so penalty entries that dwarf the rest of `Q` do not
//! force a tiny common step on every coordinate.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpOptions {
    pub max_iterations: usize,
    /// Converged once the scaled projected step `‖P(y + D∇f) − y‖ ≤ tolerance`,
    /// with `D` the per-coordinate inverse curvature.
    pub tolerance: f64,
    /// Keep the objective value of every accepted iterate.
    pub record_trace: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-6,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    /// Norm of the scaled projected step at `y`.
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with `y0` (when recorded).
    pub trace: Vec<f64>,
}

fn objective(g: &[f64], q: &[Vec<f64>], lambda: f64, y: &[f64]) -> f64 {
    let lin: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
    let quad: f64 = q
        .iter()
        .zip(y)
        .map(|(row, yi)| yi * row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    lin - lambda * quad
}

fn gradient(g: &[f64], q: &[Vec<f64>], lambda: f64, y: &[f64], out: &mut [f64]) {
    let m = g.len();
    for i in 0..m {
        let mut s = 0.0;
        for k in 0..m {
            s += (q[i][k] + q[k][i]) * y[k];
        }
        out[i] = g[i] - lambda * s;
    }
}

fn project_step(y: &[f64], dir: &[f64], scale: &[f64], alpha: f64, out: &mut [f64]) {
    for (((o, yi), di), si) in out.iter_mut().zip(y).zip(dir).zip(scale) {
        *o = (yi + alpha * si * di).clamp(0.0, 1.0);
    }
}

fn projected_step_norm(y: &[f64], grad: &[f64], scale: &[f64]) -> f64 {
    y.iter()
        .zip(grad)
        .zip(scale)
        .map(|((yi, gi), si)| ((yi + si * gi).clamp(0.0, 1.0) - yi).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Maximises `gᵀy − λ yᵀQy` over the unit box starting from `y0`.
pub fn solve_box_qp(
    g: &[f64],
    q: &[Vec<f64>],
    lambda: f64,
    y0: &[f64],
    opts: &QpOptions,
) -> Result<QpSolution> {
    let m = g.len();
    assert_eq!(q.len(), m, "Q must be m × m");
    assert_eq!(y0.len(), m, "y0 must have length m");
    let mut y: Vec<f64> = y0.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut f = objective(g, q, lambda, &y);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    // Per-coordinate inverse curvature; Gershgorin row bound where the
    // diagonal gives no curvature.
    let scale: Vec<f64> = (0..m)
        .map(|i| {
            let diag = 2.0 * lambda * q[i][i];
            if diag > 0.0 {
                1.0 / diag
            } else {
                let row = lambda * (0..m).map(|k| (q[i][k] + q[k][i]).abs()).sum::<f64>();
                if row > 0.0 {
                    1.0 / row
                } else {
                    1.0
                }
            }
        })
        .collect();
    let mut alpha = 1.0;

    let mut grad = vec![0.0; m];
    let mut trial = vec![0.0; m];
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(f);
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut residual;
    loop {
        gradient(g, q, lambda, &y, &mut grad);
        residual = projected_step_norm(&y, &grad, &scale);
        if !residual.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        if residual <= opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut accepted = false;
        while alpha > 1e-30 {
            project_step(&y, &grad, &scale, alpha, &mut trial);
            let f_trial = objective(g, q, lambda, &trial);
            if !f_trial.is_finite() {
                return Err(Error::NonFiniteObjective);
            }
            let ascent: f64 = grad
                .iter()
                .zip(&trial)
                .zip(&y)
                .map(|((d, t), v)| d * (t - v))
                .sum();
            if f_trial >= f + 1e-4 * ascent && f_trial >= f {
                std::mem::swap(&mut y, &mut trial);
                f = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No ascent possible at machine precision.
            break;
        }
        if opts.record_trace {
            trace.push(f);
        }
        alpha *= 2.0;
    }

    Ok(QpSolution {
        y,
        objective: f,
        stationarity_residual: residual,
        iterations,
        converged,
        trace,
    })
}

/// Indices whose relaxed selection value reaches `pi`.
pub fn qp_select(y: &[f64], pi: f64) -> Vec<usize> {
    y.iter()
        .enumerate()
        .filter(|(_, &v)| v >= pi)
        .map(|(i, _)| i)
        .collect()
}

/// Keeps selected hypotheses in decreasing order of `y`, dropping any that are
/// flagged similar in `b` to one already kept. Returns kept indices in
/// decreasing order of `y`.
pub fn suppress_correlated(selected: &[usize], y: &[f64], b: &[Vec<bool>]) -> Vec<usize> {
    let mut order = selected.to_vec();
    order.sort_by(|&i, &k| y[k].total_cmp(&y[i]).then(i.cmp(&k)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| !b[i][k]) {
            kept.push(i);
        }
    }
    kept
}
