//! Two-view models: homographies (normalized DLT, symmetric transfer error)
//! and fundamental matrices (normalized 8-point, Sampson distance).
//!
//! Correspondences are flat `[x, y, x', y']` slices.

use nalgebra::{Matrix3, SMatrix, Vector3};

use super::{rank_deficient, Model};
use crate::error::{Error, Result};

type Design = SMatrix<f64, 9, 9>;

/// Similarity transform moving the centroid to the origin with mean distance √2.
fn normalizing_transform(pts: impl Iterator<Item = (f64, f64)> + Clone) -> Result<Matrix3<f64>> {
    let n = pts.clone().count() as f64;
    let (sx, sy) = pts
        .clone()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = pts.map(|(x, y)| (x - cx).hypot(y - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::DegenerateMss);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s,
        0.0,
        -s * cx,
        0.0,
        s,
        -s * cy,
        0.0,
        0.0,
        1.0,
    ))
}

fn transforms(corrs: &[&[f64]], normalize: bool) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    if normalize {
        let t1 = normalizing_transform(corrs.iter().map(|c| (c[0], c[1])))?;
        let t2 = normalizing_transform(corrs.iter().map(|c| (c[2], c[3])))?;
        Ok((t1, t2))
    } else {
        Ok((Matrix3::identity(), Matrix3::identity()))
    }
}

fn apply(t: &Matrix3<f64>, x: f64, y: f64) -> (f64, f64) {
    let p = t * Vector3::new(x, y, 1.0);
    (p.x / p.z, p.y / p.z)
}

/// Null vector of a design matrix with at most 8 informative rows (the rest
/// zero). Fails when the null space is more than one-dimensional.
fn null_vector(a: &Design, informative_rows: usize) -> Result<Matrix3<f64>> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateMss)?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    // Informative singular values must all be significant.
    let informative: Vec<f64> = order[..informative_rows]
        .iter()
        .map(|&i| svd.singular_values[i])
        .collect();
    if rank_deficient(&informative) {
        return Err(Error::DegenerateMss);
    }
    let null = v_t.row(order[8]);
    Ok(Matrix3::new(
        null[0], null[1], null[2], null[3], null[4], null[5], null[6], null[7], null[8],
    ))
}

/// Unit Frobenius norm with the largest-magnitude entry made positive.
fn canonical(m: Matrix3<f64>) -> Result<Matrix3<f64>> {
    let norm = m.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateMss);
    }
    let mut m = m / norm;
    let pivot = m
        .iter()
        .copied()
        .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
    if pivot < 0.0 {
        m = -m;
    }
    Ok(m)
}

/// Direct linear transform from exactly four correspondences.
///
/// With `normalize` set, both views are conditioned by a similarity transform
/// before the solve.
pub fn fit_homography(corrs: &[&[f64]], normalize: bool) -> Result<Model> {
    if corrs.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: corrs.len(),
        });
    }
    let (t1, t2) = transforms(corrs, normalize)?;
    let mut a = Design::zeros();
    for (k, c) in corrs.iter().enumerate() {
        let (x, y) = apply(&t1, c[0], c[1]);
        let (u, v) = apply(&t2, c[2], c[3]);
        let r = 2 * k;
        let row1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        let row2 = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u];
        for col in 0..9 {
            a[(r, col)] = row1[col];
            a[(r + 1, col)] = row2[col];
        }
    }
    let hn = null_vector(&a, 8)?;
    let t2_inv = t2.try_inverse().ok_or(Error::DegenerateMss)?;
    let h = canonical(t2_inv * hn * t1)?;
    if rank_deficient(h.singular_values().as_slice()) {
        return Err(Error::DegenerateMss);
    }
    let h_inv = h.try_inverse().ok_or(Error::DegenerateMss)?;
    Ok(Model::Homography { h, h_inv })
}

/// Eight-point algorithm with rank-2 projection.
pub fn fit_fundamental(corrs: &[&[f64]], normalize: bool) -> Result<Model> {
    if corrs.len() != 8 {
        return Err(Error::DimensionMismatch {
            expected: 8,
            got: corrs.len(),
        });
    }
    let (t1, t2) = transforms(corrs, normalize)?;
    let mut a = Design::zeros();
    for (k, c) in corrs.iter().enumerate() {
        let (x, y) = apply(&t1, c[0], c[1]);
        let (u, v) = apply(&t2, c[2], c[3]);
        let row = [u * x, u * y, u, v * x, v * y, v, x, y, 1.0];
        for col in 0..9 {
            a[(k, col)] = row[col];
        }
    }
    let fn_ = null_vector(&a, 8)?;
    let fn_ = enforce_rank2(fn_)?;
    let f = canonical(t2.transpose() * fn_ * t1)?;
    Ok(Model::Fundamental { f })
}

fn enforce_rank2(f: Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = f.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateMss),
    };
    let mut s = svd.singular_values;
    let min = (0..3).min_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap();
    s[min] = 0.0;
    Ok(u * Matrix3::from_diagonal(&s) * v_t)
}

fn transfer_sq(m: &Matrix3<f64>, x: f64, y: f64, u: f64, v: f64) -> f64 {
    let p = m * Vector3::new(x, y, 1.0);
    if p.z == 0.0 {
        return f64::INFINITY;
    }
    let (px, py) = (p.x / p.z, p.y / p.z);
    (u - px).powi(2) + (v - py).powi(2)
}

/// `sqrt(d(x', Hx)² + d(x, H⁻¹x')²)`.
pub fn symmetric_transfer_error(h: &Matrix3<f64>, h_inv: &Matrix3<f64>, c: &[f64]) -> f64 {
    let forward = transfer_sq(h, c[0], c[1], c[2], c[3]);
    let backward = transfer_sq(h_inv, c[2], c[3], c[0], c[1]);
    (forward + backward).sqrt()
}

/// First-order geometric error `|x'ᵀFx| / ‖(Fx)₁₂, (Fᵀx')₁₂‖`.
pub fn sampson_distance(f: &Matrix3<f64>, c: &[f64]) -> f64 {
    let x = Vector3::new(c[0], c[1], 1.0);
    let xp = Vector3::new(c[2], c[3], 1.0);
    let fx = f * x;
    let ftxp = f.transpose() * xp;
    let e = xp.dot(&fx);
    let denom = fx.x * fx.x + fx.y * fx.y + ftxp.x * ftxp.x + ftxp.y * ftxp.y;
    if denom == 0.0 {
        return if e == 0.0 { 0.0 } else { f64::INFINITY };
    }
    e.abs() / denom.sqrt()
}
