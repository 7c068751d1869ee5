//! Quadric edge collapse decimation with manifold and orientation guards.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::diff::vec3::{cross3, dot3, norm3, sub3};
use crate::error::{Error, Result};

use super::mesh::{TriMesh, MIN_FACE_AREA};
use super::printability::watertightness;

#[derive(Debug, Clone)]
pub struct QecdOutcome {
    pub mesh: TriMesh,
    pub achieved_faces: usize,
    /// False when no further legal collapse existed before reaching the target.
    pub reached_target: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    a: usize,
    b: usize,
    stamp: (u32, u32),
    // placements sorted by increasing error; the first legal one is used
    options: [[f64; 3]; 4],
    n_options: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // min-heap on cost, ties broken by vertex ids for determinism
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost).then_with(|| (o.a, o.b).cmp(&(self.a, self.b)))
    }
}

fn plane_quadric(p: [[f64; 3]; 3]) -> Matrix4<f64> {
    let n = cross3(sub3(p[1], p[0]), sub3(p[2], p[0]));
    let len = norm3(n);
    if len == 0.0 {
        return Matrix4::zeros();
    }
    let n = [n[0] / len, n[1] / len, n[2] / len];
    let d = -dot3(n, p[0]);
    let v = Vector4::new(n[0], n[1], n[2], d);
    v * v.transpose()
}

fn sorted(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

fn quadric_cost(q: &Matrix4<f64>, p: [f64; 3]) -> f64 {
    let v = Vector4::new(p[0], p[1], p[2], 1.0);
    (v.transpose() * q * v)[(0, 0)].max(0.0)
}

struct State {
    pos: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    alive: Vec<bool>,
    incident: Vec<BTreeSet<usize>>,
    quadric: Vec<Matrix4<f64>>,
    version: Vec<u32>,
    live_faces: usize,
}

impl State {
    fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.incident[v].iter().flat_map(|&f| self.faces[f]).filter(|&u| u != v).collect()
    }

    fn candidate(&self, a: usize, b: usize) -> Candidate {
        let q = self.quadric[a] + self.quadric[b];
        let m = Matrix3::new(q[(0, 0)], q[(0, 1)], q[(0, 2)], q[(1, 0)], q[(1, 1)], q[(1, 2)], q[(2, 0)], q[(2, 1)], q[(2, 2)]);
        let rhs = -Vector3::new(q[(0, 3)], q[(1, 3)], q[(2, 3)]);
        let (pa, pb) = (self.pos[a], self.pos[b]);
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, (pa[2] + pb[2]) / 2.0];
        let mut options = vec![pa, pb, mid];
        if m.determinant().abs() > 1e-10 {
            if let Some(inv) = m.try_inverse() {
                let x = inv * rhs;
                let opt = [x[0], x[1], x[2]];
                // keep the optimum only when it stays near the edge
                let edge = norm3(sub3(pa, pb));
                if norm3(sub3(opt, mid)) <= 2.0 * edge {
                    options.insert(0, opt);
                }
            }
        }
        let mut scored: Vec<([f64; 3], f64)> = options.into_iter().map(|p| (p, quadric_cost(&q, p))).collect();
        scored.sort_by(|x, y| x.1.total_cmp(&y.1));
        let mut opts = [[0.0; 3]; 4];
        for (slot, (p, _)) in opts.iter_mut().zip(&scored) {
            *slot = *p;
        }
        Candidate {
            cost: scored[0].1,
            a: a.min(b),
            b: a.max(b),
            stamp: (self.version[a.min(b)], self.version[a.max(b)]),
            options: opts,
            n_options: scored.len(),
        }
    }

    /// First placement that keeps the mesh manifold and unflipped.
    fn legal_position(&self, c: &Candidate) -> Option<[f64; 3]> {
        let (a, b) = (c.a, c.b);
        let shared: Vec<usize> = self.incident[a].intersection(&self.incident[b]).copied().collect();
        if shared.len() != 2 || self.live_faces < 6 {
            return None;
        }
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        if na.intersection(&nb).count() != 2 {
            return None;
        }
        if na.len() <= 3 && nb.len() <= 3 {
            return None;
        }
        // remapped faces of b must not duplicate an existing face of a
        let a_faces: Vec<[usize; 3]> = self.incident[a].iter().map(|&f| sorted(self.faces[f])).collect();
        for &f in &self.incident[b] {
            if shared.contains(&f) {
                continue;
            }
            if a_faces.contains(&sorted(self.faces[f].map(|x| if x == b { a } else { x }))) {
                return None;
            }
        }
        c.options[..c.n_options].iter().copied().find(|&p| self.unflipped(a, b, &shared, p))
    }

    fn unflipped(&self, a: usize, b: usize, shared: &[usize], pos: [f64; 3]) -> bool {
        for &v in [a, b].iter() {
            for &f in &self.incident[v] {
                if shared.contains(&f) {
                    continue;
                }
                let old = self.faces[f];
                let new = old.map(|x| if x == a || x == b { usize::MAX } else { x });
                let pts_old = old.map(|x| self.pos[x]);
                let pts_new = new.map(|x| if x == usize::MAX { pos } else { self.pos[x] });
                let n_old = cross3(sub3(pts_old[1], pts_old[0]), sub3(pts_old[2], pts_old[0]));
                let n_new = cross3(sub3(pts_new[1], pts_new[0]), sub3(pts_new[2], pts_new[0]));
                if 0.5 * norm3(n_new) <= MIN_FACE_AREA || dot3(n_old, n_new) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, c: &Candidate, pos: [f64; 3]) {
        let (a, b) = (c.a, c.b);
        let b_faces: Vec<usize> = self.incident[b].iter().copied().collect();
        for f in b_faces {
            if self.faces[f].contains(&a) {
                self.alive[f] = false;
                self.live_faces -= 1;
                for v in self.faces[f] {
                    self.incident[v].remove(&f);
                }
            } else {
                for slot in self.faces[f].iter_mut() {
                    if *slot == b {
                        *slot = a;
                    }
                }
                self.incident[a].insert(f);
            }
        }
        self.incident[b].clear();
        self.pos[a] = pos;
        self.quadric[a] = self.quadric[a] + self.quadric[b];
        self.version[a] += 1;
        self.version[b] += 1;
    }
}

/// Collapses edges in order of increasing quadric error until the face count
/// is at most `target_faces`, skipping any collapse that would break
/// manifoldness or flip a face.
pub fn qecd_simplify(mesh: &TriMesh, target_faces: usize) -> Result<QecdOutcome> {
    if target_faces < 4 {
        return Err(Error::InvalidArgument(format!("target_faces must be >= 4, got {target_faces}")));
    }
    if !watertightness(mesh) {
        return Err(Error::InvalidArgument("decimation requires a watertight mesh".into()));
    }
    let nv = mesh.vertices().len();
    let mut st = State {
        pos: mesh.vertices().to_vec(),
        faces: mesh.faces().to_vec(),
        alive: vec![true; mesh.faces().len()],
        incident: vec![BTreeSet::new(); nv],
        quadric: vec![Matrix4::zeros(); nv],
        version: vec![0; nv],
        live_faces: mesh.faces().len(),
    };
    for (fi, f) in mesh.faces().iter().enumerate() {
        let q = plane_quadric(f.map(|i| st.pos[i]));
        for &v in f {
            st.incident[v].insert(fi);
            st.quadric[v] += q;
        }
    }
    let mut heap = BinaryHeap::new();
    let mut seen = BTreeSet::new();
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]));
            if seen.insert((a, b)) {
                heap.push(st.candidate(a, b));
            }
        }
    }
    let mut collapsed_since_rebuild = false;
    while st.live_faces > target_faces {
        let Some(c) = heap.pop() else {
            // rejected candidates may have become legal after nearby collapses
            if !collapsed_since_rebuild {
                break;
            }
            collapsed_since_rebuild = false;
            let mut edges = BTreeSet::new();
            for (fi, f) in st.faces.iter().enumerate() {
                if st.alive[fi] {
                    for k in 0..3 {
                        edges.insert((f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3])));
                    }
                }
            }
            heap.extend(edges.into_iter().map(|(a, b)| st.candidate(a, b)));
            continue;
        };
        if c.stamp != (st.version[c.a], st.version[c.b]) || st.incident[c.a].is_empty() || st.incident[c.b].is_empty() {
            continue;
        }
        let Some(pos) = st.legal_position(&c) else { continue };
        st.collapse(&c, pos);
        collapsed_since_rebuild = true;
        for n in st.neighbors(c.a) {
            heap.push(st.candidate(c.a, n));
        }
    }

    let mut remap = vec![usize::MAX; nv];
    let mut verts = Vec::new();
    for (fi, f) in st.faces.iter().enumerate() {
        if !st.alive[fi] {
            continue;
        }
        for &v in f {
            if remap[v] == usize::MAX {
                remap[v] = 0;
            }
        }
    }
    for v in 0..nv {
        if remap[v] == 0 {
            remap[v] = verts.len();
            verts.push(st.pos[v]);
        }
    }
    let faces: Vec<[usize; 3]> =
        st.faces.iter().zip(&st.alive).filter(|(_, &a)| a).map(|(f, _)| f.map(|v| remap[v])).collect();
    let achieved = faces.len();
    let out = TriMesh::new(verts, faces)?;
    Ok(QecdOutcome { mesh: out, achieved_faces: achieved, reached_target: achieved <= target_faces })
}
