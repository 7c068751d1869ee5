use std::f64::consts::PI;

use msfadv::geometry::shapes::{box_mesh, icosphere, subdivide, tetrahedron, traffic_cone, unit_cube, ConeParams};
use msfadv::geometry::{angle_deficit_sum, qecd_simplify, self_intersection_ratio, watertightness, TriMesh};
use proptest::prelude::*;

type Tri = [[f64; 3]; 3];

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn tri(m: &TriMesh, f: usize) -> Tri {
    m.faces()[f].map(|i| m.vertices()[i])
}

/// Parametric segment/triangle crossing: solve p + t(q-p) = a + u(b-a) + v(c-a).
fn segment_crosses(p: [f64; 3], q: [f64; 3], t: &Tri) -> bool {
    let d = sub(q, p);
    let e1 = sub(t[1], t[0]);
    let e2 = sub(t[2], t[0]);
    let h = cross(d, e2);
    let det = dot(e1, h);
    if det.abs() < 1e-14 {
        return false;
    }
    let s = sub(p, t[0]);
    let u = dot(s, h) / det;
    let qv = cross(s, e1);
    let v = dot(d, qv) / det;
    let w = dot(e2, qv) / det;
    u >= 0.0 && v >= 0.0 && u + v <= 1.0 && (0.0..=1.0).contains(&w)
}

fn pair_intersects(a: &Tri, b: &Tri) -> bool {
    (0..3).any(|k| segment_crosses(a[k], a[(k + 1) % 3], b)) || (0..3).any(|k| segment_crosses(b[k], b[(k + 1) % 3], a))
}

fn brute_force_ratio(m: &TriMesh) -> f64 {
    let n = m.faces().len();
    let mut hit = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            let (fi, fj) = (m.faces()[i], m.faces()[j]);
            if i != j && !fi.iter().any(|v| fj.contains(v)) && pair_intersects(&tri(m, i), &tri(m, j)) {
                hit[i] = true;
            }
        }
    }
    hit.iter().filter(|&&h| h).count() as f64 / n as f64
}

#[test]
fn interpenetrating_tetrahedra_match_brute_force() {
    let a = tetrahedron([0.0; 3], 1.0);
    // offset along a generic direction so no faces are coplanar
    let b = tetrahedron([0.31, 0.17, 0.23], 0.9);
    let m = a.merged(&b);
    let expected = brute_force_ratio(&m);
    assert!(expected > 0.0 && expected <= 1.0, "{expected}");
    assert_eq!(self_intersection_ratio(&m), expected);
}

#[test]
fn pierced_box_pair_matches_brute_force() {
    let m = box_mesh([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).merged(&box_mesh([0.4, 0.35, -0.5], [0.6, 0.55, 1.5]));
    let expected = brute_force_ratio(&m);
    assert!(expected > 0.0);
    assert_eq!(self_intersection_ratio(&m), expected);
}

#[test]
fn traffic_cone_is_clean() {
    let cone = traffic_cone(ConeParams::default(), 0.0, 0.0, 0.0);
    assert!(watertightness(&cone));
    assert_eq!(self_intersection_ratio(&cone), 0.0);
    assert_eq!(brute_force_ratio(&cone), 0.0);
}

#[test]
fn shipped_meshes_satisfy_gauss_bonnet() {
    let meshes = [
        unit_cube(),
        subdivide(&unit_cube(), 2),
        icosphere(1.0, 0),
        icosphere(2.0, 3),
        tetrahedron([1.0, 2.0, 3.0], 0.5),
        box_mesh([-1.0, 0.0, 0.0], [2.0, 0.5, 0.3]),
        traffic_cone(ConeParams::default(), 3.0, -1.0, 0.0),
    ];
    for m in &meshes {
        assert!(watertightness(m));
        assert!((angle_deficit_sum(m) - 4.0 * PI).abs() < 1e-6);
    }
}

fn closest_on_triangle(p: [f64; 3], t: &Tri) -> [f64; 3] {
    let (a, b, c) = (t[0], t[1], t[2]);
    let (ab, ac, ap) = (sub(b, a), sub(c, a), sub(p, a));
    let (d1, d2) = (dot(ab, ap), dot(ac, ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let (d3, d4) = (dot(ab, bp), dot(ac, bp));
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return lerp(a, b, d1 / (d1 - d3));
    }
    let cp = sub(p, c);
    let (d5, d6) = (dot(ab, cp), dot(ac, cp));
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return lerp(a, c, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return lerp(b, c, (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let (v, w) = (vb * denom, vc * denom);
    [0, 1, 2].map(|k| a[k] + ab[k] * v + ac[k] * w)
}

fn distance_to_mesh(p: [f64; 3], m: &TriMesh) -> f64 {
    (0..m.faces().len())
        .map(|f| {
            let q = closest_on_triangle(p, &tri(m, f));
            dot(sub(p, q), sub(p, q)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn surface_samples(m: &TriMesh, n: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for f in 0..m.faces().len() {
        let t = tri(m, f);
        for i in 0..=n {
            for j in 0..=n - i {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                out.push([0, 1, 2].map(|k| t[0][k] + (t[1][k] - t[0][k]) * u + (t[2][k] - t[0][k]) * v));
            }
        }
    }
    out
}

fn sampled_hausdorff(a: &TriMesh, b: &TriMesh) -> f64 {
    let ab = surface_samples(a, 4).into_iter().map(|p| distance_to_mesh(p, b)).fold(0.0, f64::max);
    let ba = surface_samples(b, 4).into_iter().map(|p| distance_to_mesh(p, a)).fold(0.0, f64::max);
    ab.max(ba)
}

#[test]
fn decimated_sphere_stays_close_to_the_original() {
    let sphere = icosphere(1.0, 3);
    let out = qecd_simplify(&sphere, 80).unwrap();
    assert!(out.achieved_faces <= 80 && watertightness(&out.mesh));
    let h = sampled_hausdorff(&sphere, &out.mesh);
    assert!(h < 0.1, "hausdorff {h}");

    // 20 triangles cannot get within 10% of a unit sphere; an inscribed
    // icosahedron is about 0.2 away at its face centres
    let coarse = qecd_simplify(&sphere, 20).unwrap();
    assert!(coarse.achieved_faces <= 20 && watertightness(&coarse.mesh));
    let h = sampled_hausdorff(&sphere, &coarse.mesh);
    assert!(h < 0.3, "hausdorff {h}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ellipsoids_never_self_intersect(sx in 0.2f64..3.0, sy in 0.2f64..3.0, sz in 0.2f64..3.0, level in 0usize..3) {
        let s = icosphere(1.0, level);
        let m = s.with_vertices(s.vertices().iter().map(|v| [v[0] * sx, v[1] * sy, v[2] * sz]).collect()).unwrap();
        prop_assert_eq!(self_intersection_ratio(&m), 0.0);
    }

    #[test]
    fn watertightness_ignores_vertex_positions(seed in proptest::collection::vec(-0.05f64..0.05, 42 * 3)) {
        let s = icosphere(1.0, 1);
        let v: Vec<[f64; 3]> = s.vertices().iter().enumerate().map(|(i, p)| [0, 1, 2].map(|k| p[k] + seed[3 * i + k])).collect();
        let m = s.with_vertices(v).unwrap();
        prop_assert!(watertightness(&m));
        prop_assert!((angle_deficit_sum(&m) - 4.0 * PI).abs() < 1e-6);
    }
}
