use nalgebra::{Matrix2, Matrix2x3, Vector3};

use super::{rank_deficient, Model};
use crate::error::{Error, Result};

pub(super) fn fit_line(p: &[f64], q: &[f64]) -> Result<Model> {
    let rows = Matrix2x3::new(p[0], p[1], 1.0, q[0], q[1], 1.0);
    if rank_deficient(rows.singular_values().as_slice()) {
        return Err(Error::DegenerateMss);
    }
    let l = Vector3::new(p[0], p[1], 1.0).cross(&Vector3::new(q[0], q[1], 1.0));
    let norm = l.x.hypot(l.y);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateMss);
    }
    Ok(Model::Line {
        a: l.x / norm,
        b: l.y / norm,
        c: l.z / norm,
    })
}

/// Circumcircle of three points.
pub(super) fn fit_circle(p1: &[f64], p2: &[f64], p3: &[f64]) -> Result<Model> {
    let (ax, ay) = (p2[0] - p1[0], p2[1] - p1[1]);
    let (bx, by) = (p3[0] - p1[0], p3[1] - p1[1]);
    let a = Matrix2::new(ax, ay, bx, by);
    if rank_deficient(a.singular_values().as_slice()) {
        return Err(Error::DegenerateMss);
    }
    // Center offset u from p1 solves 2 A u = (|a|², |b|²).
    let det = 2.0 * (ax * by - ay * bx);
    let la = ax * ax + ay * ay;
    let lb = bx * bx + by * by;
    let ux = (by * la - ay * lb) / det;
    let uy = (ax * lb - bx * la) / det;
    let r = ux.hypot(uy);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DegenerateMss);
    }
    Ok(Model::Circle {
        cx: p1[0] + ux,
        cy: p1[1] + uy,
        r,
    })
}

pub(super) fn fit_plane(p1: &[f64], p2: &[f64], p3: &[f64]) -> Result<Model> {
    let e1 = Vector3::new(p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]);
    let e2 = Vector3::new(p3[0] - p1[0], p3[1] - p1[1], p3[2] - p1[2]);
    let edges = Matrix2x3::from_rows(&[e1.transpose(), e2.transpose()]);
    if rank_deficient(edges.singular_values().as_slice()) {
        return Err(Error::DegenerateMss);
    }
    let n = e1.cross(&e2);
    let norm = n.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateMss);
    }
    let n = n / norm;
    let d = -(n.x * p1[0] + n.y * p1[1] + n.z * p1[2]);
    Ok(Model::Plane {
        normal: [n.x, n.y, n.z],
        d,
    })
}
