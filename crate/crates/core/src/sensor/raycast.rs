//! Möller–Trumbore ray/triangle intersection.

use crate::diff::vec3::{cross3, dot3, sub3};
use crate::diff::{Scalar, V3};

pub const MIN_HIT_DISTANCE: f64 = 1e-6;
const PARALLEL_EPS: f64 = 1e-12;

/// Distance along the ray and barycentrics `(b1, b2)` of the hit.
#[derive(Debug, Clone, Copy)]
pub struct RayHit<S> {
    pub t: S,
    pub b1: S,
    pub b2: S,
}

/// Value-only intersection, used for hit selection.
pub fn intersect_f64(origin: [f64; 3], dir: [f64; 3], tri: &[[f64; 3]; 3]) -> Option<RayHit<f64>> {
    let e1 = sub3(tri[1], tri[0]);
    let e2 = sub3(tri[2], tri[0]);
    let p = cross3(dir, e2);
    let det = dot3(e1, p);
    if det.abs() < PARALLEL_EPS {
        return None;
    }
    let inv = 1.0 / det;
    let s = sub3(origin, tri[0]);
    let b1 = dot3(s, p) * inv;
    if !(0.0..=1.0).contains(&b1) {
        return None;
    }
    let q = cross3(s, e1);
    let b2 = dot3(dir, q) * inv;
    if b2 < 0.0 || b1 + b2 > 1.0 {
        return None;
    }
    let t = dot3(e2, q) * inv;
    (t > MIN_HIT_DISTANCE).then_some(RayHit { t, b1, b2 })
}

/// Intersection carrying adjoints with respect to the triangle vertices.
/// The hit/no-hit decision is taken on values.
pub fn ray_triangle_intersect<S: Scalar>(origin: [f64; 3], dir: [f64; 3], tri: &[V3<S>; 3]) -> Option<RayHit<S>> {
    intersect_f64(origin, dir, &[tri[0].val(), tri[1].val(), tri[2].val()])?;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let d = V3::<S>::cst(dir);
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    let s = V3::<S>::cst(origin) - tri[0];
    let q = s.cross(&e1);
    Some(RayHit { t: e2.dot(&q) / det, b1: s.dot(&p) / det, b2: q.dot_f(dir) / det })
}
