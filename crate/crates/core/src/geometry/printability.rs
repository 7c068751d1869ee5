//! Printability metrics: watertightness, self-intersection ratio and
//! angle-deficit Gaussian curvature.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use crate::diff::vec3::{cross3, dot3, norm3, sub3};

use super::mesh::TriMesh;

/// True iff every directed edge appears exactly once and its reverse appears
/// exactly once, i.e. each undirected edge joins two oppositely oriented faces.
/// A mesh without faces holds no water.
pub fn watertightness(mesh: &TriMesh) -> bool {
    if mesh.faces().is_empty() {
        return false;
    }
    let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
    for f in mesh.faces() {
        for k in 0..3 {
            *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
        }
    }
    directed.iter().all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
}

fn boundary_vertices(mesh: &TriMesh) -> HashSet<usize> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    count.into_iter().filter(|&(_, n)| n != 2).flat_map(|((a, b), _)| [a, b]).collect()
}

fn orient(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> f64 {
    dot3(sub3(b, a), cross3(sub3(c, a), sub3(d, a)))
}

fn snap(v: f64, tol: f64) -> f64 {
    if v.abs() <= tol {
        0.0
    } else {
        v
    }
}

fn segment_hits_triangle(p: [f64; 3], q: [f64; 3], t: &[[f64; 3]; 3], tol: f64) -> bool {
    let o1 = snap(orient(t[0], t[1], t[2], p), tol);
    let o2 = snap(orient(t[0], t[1], t[2], q), tol);
    if (o1 > 0.0 && o2 > 0.0) || (o1 < 0.0 && o2 < 0.0) || (o1 == 0.0 && o2 == 0.0) {
        return false;
    }
    let s1 = snap(orient(p, q, t[0], t[1]), tol);
    let s2 = snap(orient(p, q, t[1], t[2]), tol);
    let s3 = snap(orient(p, q, t[2], t[0]), tol);
    (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0)
}

fn coplanar(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3], tol: f64) -> bool {
    b.iter().all(|&p| orient(a[0], a[1], a[2], p).abs() <= tol)
}

/// Orientation determinants below this are treated as zero; scales with the
/// cube of the pair's extent.
fn orient_tolerance(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut lo = a[0];
    let mut hi = a[0];
    for p in a.iter().chain(b) {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let l = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    1e-12 * l * l * l
}

fn orient2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross_2d(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient2(q1, q2, p1);
    let d2 = orient2(q1, q2, p2);
    let d3 = orient2(p1, p2, q1);
    let d4 = orient2(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: f64| {
        d == 0.0 && c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn inside_2d(p: [f64; 2], t: &[[f64; 2]; 3]) -> bool {
    let a = orient2(t[0], t[1], p);
    let b = orient2(t[1], t[2], p);
    let c = orient2(t[2], t[0], p);
    (a >= 0.0 && b >= 0.0 && c >= 0.0) || (a <= 0.0 && b <= 0.0 && c <= 0.0)
}

fn coplanar_overlap(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> bool {
    let n = cross3(sub3(a[1], a[0]), sub3(a[2], a[0]));
    let drop = (0..3).max_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs())).unwrap_or(2);
    let proj = |p: [f64; 3]| match drop {
        0 => [p[1], p[2]],
        1 => [p[0], p[2]],
        _ => [p[0], p[1]],
    };
    let a2 = [proj(a[0]), proj(a[1]), proj(a[2])];
    let b2 = [proj(b[0]), proj(b[1]), proj(b[2])];
    for i in 0..3 {
        for j in 0..3 {
            if segments_cross_2d(a2[i], a2[(i + 1) % 3], b2[j], b2[(j + 1) % 3]) {
                return true;
            }
        }
    }
    inside_2d(a2[0], &b2) || inside_2d(b2[0], &a2)
}

/// Closed-set intersection test of two triangles.
pub fn triangles_intersect(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> bool {
    let tol = orient_tolerance(a, b);
    if coplanar(a, b, tol) {
        return coplanar_overlap(a, b);
    }
    (0..3).any(|k| segment_hits_triangle(a[k], a[(k + 1) % 3], b, tol))
        || (0..3).any(|k| segment_hits_triangle(b[k], b[(k + 1) % 3], a, tol))
}

/// Fraction of faces intersecting at least one face they share no vertex with.
pub fn self_intersection_ratio(mesh: &TriMesh) -> f64 {
    let nf = mesh.faces().len();
    if nf == 0 {
        return 0.0;
    }
    let tri = |f: usize| {
        let [a, b, c] = mesh.faces()[f];
        [mesh.vertices()[a], mesh.vertices()[b], mesh.vertices()[c]]
    };
    let tris: Vec<[[f64; 3]; 3]> = (0..nf).map(tri).collect();
    let boxes: Vec<([f64; 3], [f64; 3])> = tris
        .iter()
        .map(|t| {
            let mut lo = t[0];
            let mut hi = t[0];
            for p in &t[1..] {
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            (lo, hi)
        })
        .collect();
    // sweep along x
    let mut order: Vec<usize> = (0..nf).collect();
    order.sort_by(|&i, &j| boxes[i].0[0].total_cmp(&boxes[j].0[0]));
    let mut hit = vec![false; nf];
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            if boxes[j].0[0] > boxes[i].1[0] {
                break;
            }
            if (hit[i] && hit[j]) || (1..3).any(|k| boxes[j].0[k] > boxes[i].1[k] || boxes[i].0[k] > boxes[j].1[k]) {
                continue;
            }
            let (fi, fj) = (mesh.faces()[i], mesh.faces()[j]);
            if fi.iter().any(|v| fj.contains(v)) {
                continue;
            }
            if triangles_intersect(&tris[i], &tris[j]) {
                hit[i] = true;
                hit[j] = true;
            }
        }
    }
    hit.iter().filter(|&&h| h).count() as f64 / nf as f64
}

/// Per-vertex angle-deficit curvature.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    /// 2π − Σ incident angles, for interior vertices.
    pub deficits: Vec<Option<f64>>,
    /// deficit / mixed area (1/m²).
    pub per_vertex: Vec<Option<f64>>,
    pub mean: f64,
    pub mean_abs: f64,
    /// Interior vertices with zero mixed area.
    pub skipped: Vec<usize>,
}

fn angle_at(p: [f64; 3], q: [f64; 3], r: [f64; 3]) -> f64 {
    let u = sub3(q, p);
    let v = sub3(r, p);
    norm3(cross3(u, v)).atan2(dot3(u, v))
}

fn cot_at(p: [f64; 3], q: [f64; 3], r: [f64; 3]) -> f64 {
    let u = sub3(q, p);
    let v = sub3(r, p);
    dot3(u, v) / norm3(cross3(u, v))
}

/// Angle deficits over mixed Voronoi areas. Boundary and isolated vertices get `None`.
pub fn mean_gaussian_curvature(mesh: &TriMesh) -> CurvatureReport {
    let n = mesh.vertices().len();
    let v = mesh.vertices();
    let mut angle_sum = vec![0.0; n];
    let mut area = vec![0.0; n];
    let mut touched = vec![false; n];
    for f in mesh.faces() {
        let p = [v[f[0]], v[f[1]], v[f[2]]];
        let ang = [angle_at(p[0], p[1], p[2]), angle_at(p[1], p[2], p[0]), angle_at(p[2], p[0], p[1])];
        let tri_area = 0.5 * norm3(cross3(sub3(p[1], p[0]), sub3(p[2], p[0])));
        let obtuse = ang.iter().position(|&a| a > PI / 2.0);
        for k in 0..3 {
            let i = f[k];
            touched[i] = true;
            angle_sum[i] += ang[k];
            let (q, r) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            area[i] += match obtuse {
                None => {
                    let pq = sub3(q, p[k]);
                    let pr = sub3(r, p[k]);
                    (dot3(pr, pr) * cot_at(q, r, p[k]) + dot3(pq, pq) * cot_at(r, p[k], q)) / 8.0
                }
                Some(o) if o == k => tri_area / 2.0,
                Some(_) => tri_area / 4.0,
            };
        }
    }
    let boundary = boundary_vertices(mesh);
    let mut deficits = vec![None; n];
    let mut per_vertex = vec![None; n];
    let mut skipped = Vec::new();
    for i in 0..n {
        if !touched[i] || boundary.contains(&i) {
            continue;
        }
        let d = 2.0 * PI - angle_sum[i];
        deficits[i] = Some(d);
        if area[i] > 0.0 {
            per_vertex[i] = Some(d / area[i]);
        } else {
            skipped.push(i);
        }
    }
    let vals: Vec<f64> = per_vertex.iter().flatten().copied().collect();
    let (mean, mean_abs) = if vals.is_empty() {
        (0.0, 0.0)
    } else {
        let k = vals.len() as f64;
        (vals.iter().sum::<f64>() / k, vals.iter().map(|x| x.abs()).sum::<f64>() / k)
    };
    CurvatureReport { deficits, per_vertex, mean, mean_abs, skipped }
}

/// Σ angle deficits over interior vertices; 2πχ for a closed surface.
pub fn angle_deficit_sum(mesh: &TriMesh) -> f64 {
    mean_gaussian_curvature(mesh).deficits.iter().flatten().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    #[test]
    fn cube_is_watertight_until_a_face_goes() {
        let cube = shapes::unit_cube();
        assert!(watertightness(&cube));
        let mut faces = cube.faces().to_vec();
        faces.pop();
        assert!(!watertightness(&TriMesh::new(cube.vertices().to_vec(), faces).unwrap()));
    }

    #[test]
    fn two_disjoint_tetrahedra_are_watertight() {
        let m = shapes::tetrahedron([0.0; 3], 1.0).merged(&shapes::tetrahedron([5.0, 0.0, 0.0], 1.0));
        assert!(watertightness(&m));
    }

    #[test]
    fn flipped_face_breaks_watertightness() {
        let cube = shapes::unit_cube();
        let mut faces = cube.faces().to_vec();
        faces[0].swap(1, 2);
        assert!(!watertightness(&TriMesh::new(cube.vertices().to_vec(), faces).unwrap()));
    }

    #[test]
    fn convex_meshes_do_not_self_intersect() {
        assert_eq!(self_intersection_ratio(&shapes::unit_cube()), 0.0);
        assert_eq!(self_intersection_ratio(&shapes::icosphere(1.0, 2)), 0.0);
        let disjoint = shapes::tetrahedron([0.0; 3], 1.0).merged(&shapes::tetrahedron([5.0, 0.0, 0.0], 1.0));
        assert_eq!(self_intersection_ratio(&disjoint), 0.0);
    }

    #[test]
    fn flat_grid_interior_is_flat() {
        let g = shapes::flat_grid(6, 0.3);
        let r = mean_gaussian_curvature(&g);
        let interior: Vec<f64> = r.per_vertex.iter().flatten().copied().collect();
        assert_eq!(interior.len(), 25);
        assert!(interior.iter().all(|k| k.abs() < 1e-9));
    }

    #[test]
    fn cube_deficits_sum_to_four_pi() {
        let r = mean_gaussian_curvature(&shapes::unit_cube());
        for d in r.deficits.iter().flatten() {
            assert!((d - PI / 2.0).abs() < 1e-12);
        }
        assert!((angle_deficit_sum(&shapes::unit_cube()) - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn sphere_curvature_matches_inverse_square_radius() {
        for (r, expected) in [(1.0, 1.0), (2.0, 0.25)] {
            let k = mean_gaussian_curvature(&shapes::icosphere(r, 3)).mean;
            assert!((k - expected).abs() / expected < 0.05, "r={r}: {k}");
        }
    }
}
