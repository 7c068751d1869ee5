//! Procedural test and scenario meshes.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::mesh::TriMesh;

/// Axis-aligned unit cube `[0,1]³`, 8 vertices and 12 outward-facing triangles.
pub fn unit_cube() -> TriMesh {
    let vertices = (0..8).map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]).collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    TriMesh::new(vertices, faces).expect("static cube")
}

/// Splits every triangle into four, `levels` times; new vertices on edge midpoints.
pub fn subdivide(mesh: &TriMesh, levels: usize) -> TriMesh {
    let mut verts = mesh.vertices().to_vec();
    let mut faces = mesh.faces().to_vec();
    for _ in 0..levels {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut m = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[k] = *mid.entry(key).or_insert_with(|| {
                    let (pa, pb) = (verts[a], verts[b]);
                    verts.push([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, (pa[2] + pb[2]) / 2.0]);
                    verts.len() - 1
                });
            }
            next.push([f[0], m[0], m[2]]);
            next.push([f[1], m[1], m[0]]);
            next.push([f[2], m[2], m[1]]);
            next.push([m[0], m[1], m[2]]);
        }
        faces = next;
    }
    TriMesh::new(verts, faces).expect("subdivision keeps faces valid")
}

/// Icosahedron projected to a sphere after `levels` 4-way subdivisions.
pub fn icosphere(radius: f64, levels: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut mesh = TriMesh::new(raw.to_vec(), faces).expect("static icosahedron");
    mesh = subdivide(&mesh, levels);
    let verts = mesh
        .vertices()
        .iter()
        .map(|v| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] * radius / n, v[1] * radius / n, v[2] * radius / n]
        })
        .collect();
    mesh.with_vertices(verts).expect("same count")
}

/// Regular-ish tetrahedron with outward faces, centred at `center`.
pub fn tetrahedron(center: [f64; 3], size: f64) -> TriMesh {
    let s = size;
    let v = vec![
        [center[0] + s, center[1] + s, center[2] + s],
        [center[0] + s, center[1] - s, center[2] - s],
        [center[0] - s, center[1] + s, center[2] - s],
        [center[0] - s, center[1] - s, center[2] + s],
    ];
    TriMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).expect("static tetrahedron")
}

/// Flat `n × n` grid of squares in the z=0 plane, each split in two.
pub fn flat_grid(n: usize, spacing: f64) -> TriMesh {
    let mut verts = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            verts.push([i as f64 * spacing, j as f64 * spacing, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(verts, faces).expect("grid")
}

/// Parameters of the closed truncated-cone traffic-cone model.
#[derive(Debug, Clone, Copy)]
pub struct ConeParams {
    pub base_radius: f64,
    pub top_radius: f64,
    pub height: f64,
    pub segments: usize,
    pub rings: usize,
}

impl Default for ConeParams {
    fn default() -> Self {
        Self { base_radius: 0.2, top_radius: 0.03, height: 1.0, segments: 24, rings: 10 }
    }
}

/// Closed truncated cone standing on z=0 with its axis through `(cx, cy)`.
pub fn traffic_cone(p: ConeParams, cx: f64, cy: f64, z0: f64) -> TriMesh {
    let mut verts = Vec::new();
    for r in 0..=p.rings {
        let f = r as f64 / p.rings as f64;
        let rad = p.base_radius + (p.top_radius - p.base_radius) * f;
        let z = z0 + p.height * f;
        for s in 0..p.segments {
            let a = 2.0 * PI * s as f64 / p.segments as f64;
            verts.push([cx + rad * a.cos(), cy + rad * a.sin(), z]);
        }
    }
    let bottom = verts.len();
    verts.push([cx, cy, z0]);
    let top = verts.len();
    verts.push([cx, cy, z0 + p.height]);
    let id = |r: usize, s: usize| r * p.segments + (s % p.segments);
    let mut faces = Vec::new();
    for r in 0..p.rings {
        for s in 0..p.segments {
            faces.push([id(r, s), id(r, s + 1), id(r + 1, s + 1)]);
            faces.push([id(r, s), id(r + 1, s + 1), id(r + 1, s)]);
        }
    }
    for s in 0..p.segments {
        faces.push([bottom, id(0, s + 1), id(0, s)]);
        faces.push([top, id(p.rings, s), id(p.rings, s + 1)]);
    }
    TriMesh::new(verts, faces).expect("cone")
}

/// Axis-aligned box `[lo, hi]` with two triangles per side.
pub fn box_mesh(lo: [f64; 3], hi: [f64; 3]) -> TriMesh {
    let cube = unit_cube();
    let v = cube
        .vertices()
        .iter()
        .map(|u| {
            [lo[0] + u[0] * (hi[0] - lo[0]), lo[1] + u[1] * (hi[1] - lo[1]), lo[2] + u[2] * (hi[2] - lo[2])]
        })
        .collect();
    cube.with_vertices(v).expect("same count")
}
