use crate::diff::vec3::{cross3, dot3, sub3};
use crate::diff::{Scalar, V3};
use crate::error::{Error, Result};
use crate::geometry::TriMesh;

use super::calib::{project_point, Calibration};
use super::image::{Image, SensorImage};

pub const AMBIENT: f64 = 0.4;
pub const DIFFUSE: f64 = 0.6;
/// Vertices closer than this to the image plane are not rasterized.
pub const NEAR_PLANE: f64 = 0.1;
/// Coverage is exactly zero beyond this many blur widths outside a triangle.
pub const COVERAGE_CUTOFF: f64 = 6.0;

#[derive(Debug, Clone)]
pub struct CameraRender<S> {
    pub image: Image<S>,
    /// Set when the mesh is non-empty but nothing of it could be drawn
    /// because it lies behind the camera.
    pub behind_camera: bool,
    /// Pixels whose value was touched by the object: (x, y, coverage).
    pub footprint: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Projected {
    px: [[f64; 2]; 3],
    depth: [f64; 3],
    silhouette: [bool; 3],
}

#[derive(Debug, Clone, Copy)]
struct Best {
    inside: bool,
    key: f64,
    tri: u32,
}

fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Nearest feature of a projected triangle to pixel point `q`.
#[derive(Debug, Clone, Copy)]
enum Nearest {
    /// Perpendicular foot on edge (i, i+1); sign of the 2D cross product.
    Edge(usize, f64),
    Vertex(usize),
}

/// Signed distance (negative inside), and the feature realizing it. Inside
/// the triangle only silhouette edges count; `None` means no silhouette edge.
fn signed_distance(px: &[[f64; 2]; 3], q: [f64; 2], sil: [bool; 3]) -> (f64, Option<Nearest>, [f64; 3]) {
    let area = cross2(sub2(px[1], px[0]), sub2(px[2], px[0]));
    let orient = area.signum();
    let mut inside = true;
    let mut best = (f64::INFINITY, None);
    let mut best_sil = (f64::INFINITY, None);
    let mut bary = [0.0; 3];
    for i in 0..3 {
        let a = px[i];
        let b = px[(i + 1) % 3];
        let ab = sub2(b, a);
        let aq = sub2(q, a);
        let c = cross2(ab, aq);
        bary[(i + 2) % 3] = c / area;
        if c * orient < 0.0 {
            inside = false;
        }
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = (aq[0] * ab[0] + aq[1] * ab[1]) / len2;
        let cand = if t <= 0.0 {
            ((aq[0] * aq[0] + aq[1] * aq[1]).sqrt(), Nearest::Vertex(i))
        } else if t >= 1.0 {
            let bq = sub2(q, b);
            ((bq[0] * bq[0] + bq[1] * bq[1]).sqrt(), Nearest::Vertex((i + 1) % 3))
        } else {
            (c.abs() / len2.sqrt(), Nearest::Edge(i, c.signum()))
        };
        if cand.0 < best.0 {
            best = (cand.0, Some(cand.1));
        }
        if sil[i] && cand.0 < best_sil.0 {
            best_sil = (cand.0, Some(cand.1));
        }
    }
    if inside {
        (-best_sil.0, best_sil.1, bary)
    } else {
        (best.0, best.1, bary)
    }
}

fn signed_distance_s<S: Scalar>(px: &[[S; 2]; 3], q: [f64; 2], inside: bool, feat: Nearest) -> S {
    let d = match feat {
        Nearest::Edge(i, sign) => {
            let a = px[i];
            let b = px[(i + 1) % 3];
            let ab = [b[0] - a[0], b[1] - a[1]];
            let aq = [-a[0] + q[0], -a[1] + q[1]];
            let c = ab[0] * aq[1] - ab[1] * aq[0];
            c * sign / (ab[0] * ab[0] + ab[1] * ab[1]).sqrt()
        }
        Nearest::Vertex(i) => {
            let dx = -px[i][0] + q[0];
            let dy = -px[i][1] + q[1];
            let d2 = dx * dx + dy * dy;
            if d2.val() < 1e-18 {
                S::cst(0.0)
            } else {
                d2.sqrt()
            }
        }
    };
    if inside {
        -d
    } else {
        d
    }
}

/// Front-facing triangles in front of the near plane, projected, with
/// silhouette flags per edge; also whether any vertex is in front at all.
fn drawable(plain: &[[f64; 3]], faces: &[[usize; 3]], calib: &Calibration) -> (Vec<(u32, Projected)>, bool) {
    let center = calib.camera_center();
    let mut any_in_front = false;
    let mut tris: Vec<(u32, Projected)> = Vec::new();
    for (fi, f) in faces.iter().enumerate() {
        let v = [plain[f[0]], plain[f[1]], plain[f[2]]];
        let depth = v.map(|p| calib.depth(p));
        if depth.iter().any(|&d| d > NEAR_PLANE) {
            any_in_front = true;
        }
        if depth.iter().any(|&d| d <= NEAR_PLANE) {
            continue;
        }
        let n = cross3(sub3(v[1], v[0]), sub3(v[2], v[0]));
        if dot3(n, sub3(center, v[0])) <= 0.0 {
            continue;
        }
        let px = v.map(|p| {
            let q = project_point(calib, &V3::<f64>(p)).expect("depth checked");
            [q[0], q[1]]
        });
        if cross2(sub2(px[1], px[0]), sub2(px[2], px[0])).abs() < 1e-12 {
            continue;
        }
        tris.push((fi as u32, Projected { px, depth, silhouette: [true; 3] }));
    }
    // edges shared by two drawn triangles are interior, not silhouette
    let mut edge_use: std::collections::HashMap<(usize, usize), u32> = std::collections::HashMap::new();
    let edge_key = |f: [usize; 3], i: usize| {
        let (a, b) = (f[i], f[(i + 1) % 3]);
        (a.min(b), a.max(b))
    };
    for (fi, _) in &tris {
        for i in 0..3 {
            *edge_use.entry(edge_key(faces[*fi as usize], i)).or_default() += 1;
        }
    }
    for (fi, t) in tris.iter_mut() {
        for i in 0..3 {
            t.silhouette[i] = edge_use[&edge_key(faces[*fi as usize], i)] < 2;
        }
    }
    (tris, any_in_front)
}

/// Coverage of the object silhouette at continuous image location `q`.
pub fn coverage_at(mesh: &TriMesh, calib: &Calibration, blur_sigma: f64, q: [f64; 2]) -> f64 {
    let (tris, _) = drawable(mesh.vertices(), mesh.faces(), calib);
    let mut best: Option<(bool, f64, f64)> = None;
    for (_, t) in &tris {
        let (sd, _, bary) = signed_distance(&t.px, q, t.silhouette);
        let inside = bary.iter().all(|&b| b >= 0.0);
        let key = if inside { 1.0 / (0..3).map(|i| bary[i] / t.depth[i]).sum::<f64>() } else { sd };
        let better = match best {
            None => true,
            Some((bi, bk, _)) => match (inside, bi) {
                (true, false) => true,
                (false, true) => false,
                _ => key < bk,
            },
        };
        if better {
            best = Some((inside, key, sd));
        }
    }
    match best {
        Some((_, _, sd)) if sd <= COVERAGE_CUTOFF * blur_sigma => sigmoid(-sd / blur_sigma),
        _ => 0.0,
    }
}

fn sigmoid(x: f64) -> f64 {
    <f64 as Scalar>::sigmoid(x)
}

/// Soft rasterizer: each pixel is covered by its nearest front-facing
/// triangle with coverage `sigmoid(-signed_distance / blur_sigma)` and
/// Lambertian shading under a light placed at the camera.
pub fn render_camera_with<S: Scalar>(
    vertices: &[V3<S>],
    faces: &[[usize; 3]],
    background: &SensorImage,
    calib: &Calibration,
    albedo: [f64; 3],
    blur_sigma: f64,
) -> Result<CameraRender<S>> {
    if !(blur_sigma > 0.0 && blur_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("blur sigma must be positive, got {blur_sigma}")));
    }
    let mut image: Image<S> = background.lift();
    let (w, h) = (background.width, background.height);
    let light = calib.optical_axis().map(|c| -c);
    let plain: Vec<[f64; 3]> = vertices.iter().map(|v| v.val()).collect();

    let (tris, any_in_front) = drawable(&plain, faces, calib);
    let behind_camera = !faces.is_empty() && !any_in_front;
    if tris.is_empty() {
        return Ok(CameraRender { image, behind_camera, footprint: Vec::new() });
    }

    let reach = COVERAGE_CUTOFF * blur_sigma;
    let clampx = |v: f64| v.clamp(0.0, w as f64) as usize;
    let clampy = |v: f64| v.clamp(0.0, h as f64) as usize;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let boxes: Vec<[usize; 4]> = tris
        .iter()
        .map(|(_, t)| {
            let lo = |k: usize| t.px.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min) - reach;
            let hi = |k: usize| t.px.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max) + reach;
            let b = [clampx((lo(0) - 0.5).floor()), clampy((lo(1) - 0.5).floor()), clampx((hi(0) + 0.5).ceil()), clampy((hi(1) + 0.5).ceil())];
            x0 = x0.min(b[0]);
            y0 = y0.min(b[1]);
            x1 = x1.max(b[2]);
            y1 = y1.max(b[3]);
            b
        })
        .collect();
    if x0 >= x1 || y0 >= y1 {
        return Ok(CameraRender { image, behind_camera, footprint: Vec::new() });
    }
    let bw = x1 - x0;
    let mut best: Vec<Option<Best>> = vec![None; bw * (y1 - y0)];
    for (k, (_, t)) in tris.iter().enumerate() {
        let b = boxes[k];
        for y in b[1]..b[3] {
            for x in b[0]..b[2] {
                let q = [x as f64 + 0.5, y as f64 + 0.5];
                let (sd, _, bary) = signed_distance(&t.px, q, t.silhouette);
                if sd > reach {
                    continue;
                }
                let cand = if sd <= 0.0 {
                    let inv: f64 = (0..3).map(|i| bary[i] / t.depth[i]).sum();
                    Best { inside: true, key: 1.0 / inv, tri: k as u32 }
                } else {
                    Best { inside: false, key: sd, tri: k as u32 }
                };
                let slot = &mut best[(y - y0) * bw + (x - x0)];
                let better = match slot {
                    None => true,
                    Some(cur) => match (cand.inside, cur.inside) {
                        (true, false) => true,
                        (false, true) => false,
                        _ => cand.key < cur.key,
                    },
                };
                if better {
                    *slot = Some(cand);
                }
            }
        }
    }

    // per-triangle differentiable projections and shading, built on demand
    let mut cache: Vec<Option<([[S; 2]; 3], [S; 3])>> = vec![None; tris.len()];
    let mut footprint = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            let Some(b) = best[(y - y0) * bw + (x - x0)] else { continue };
            let k = b.tri as usize;
            let t = &tris[k].1;
            let q = [x as f64 + 0.5, y as f64 + 0.5];
            let (_, feat, _) = signed_distance(&t.px, q, t.silhouette);
            let (spx, shade) = *cache[k].get_or_insert_with(|| {
                let f = faces[tris[k].0 as usize];
                let v = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
                let spx = v.map(|p| project_point(calib, &p).expect("depth checked"));
                let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
                let cos = n.dot_f(light) / n.norm();
                let lit = if cos.val() > 0.0 { cos * DIFFUSE + AMBIENT } else { S::cst(AMBIENT) };
                (spx, albedo.map(|a| lit * a))
            });
            let cov = match feat {
                Some(feat) => (-signed_distance_s(&spx, q, b.inside, feat) / blur_sigma).sigmoid(),
                None => S::cst(1.0),
            };
            let i = image.idx(x, y);
            for c in 0..3 {
                let bg = background.data[i + c];
                image.data[i + c] = cov * (shade[c] - bg) + bg;
            }
            footprint.push((x, y, cov.val()));
        }
    }
    Ok(CameraRender { image, behind_camera, footprint })
}

pub fn render_camera(
    mesh: &TriMesh,
    background: &SensorImage,
    calib: &Calibration,
    albedo: [f64; 3],
    blur_sigma: f64,
) -> Result<CameraRender<f64>> {
    let verts: Vec<V3<f64>> = mesh.vertices().iter().map(|&v| V3(v)).collect();
    render_camera_with(&verts, mesh.faces(), background, calib, albedo, blur_sigma)
}
