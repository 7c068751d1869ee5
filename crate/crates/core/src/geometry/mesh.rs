use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::diff::vec3::{cross3, norm3, sub3};
use crate::error::{Error, Result};

/// Smallest admissible triangle area, m².
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Vertex-face triangle mesh. Faces are counter-clockwise seen from outside.
///
/// Attack code only ever replaces vertex positions (see [`TriMesh::with_vertices`]),
/// so the face list of an adversarial mesh is the benign face list.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            check_face(&vertices, f).map_err(|m| Error::InvalidMesh(format!("face {fi}: {m}")))?;
        }
        Ok(Self { vertices, faces })
    }

    pub fn empty() -> Self {
        Self { vertices: Vec::new(), faces: Vec::new() }
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Same faces, new positions. Only the vertex count and finiteness are checked.
    pub fn with_vertices(&self, vertices: Vec<[f64; 3]>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::TopologyMismatch(format!(
                "{} positions for {} vertices",
                vertices.len(),
                self.vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex position".into()));
        }
        Ok(Self { vertices, faces: self.faces.clone() })
    }

    /// Concatenates two meshes into one (disjoint components).
    pub fn merged(&self, other: &TriMesh) -> TriMesh {
        let off = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        TriMesh { vertices, faces }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * norm3(cross3(sub3(b, a), sub3(c, a)))
    }

    pub fn centroid(&self) -> [f64; 3] {
        if self.vertices.is_empty() {
            return [0.0; 3];
        }
        let n = self.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &self.vertices {
            for k in 0..3 {
                c[k] += v[k];
            }
        }
        [c[0] / n, c[1] / n, c[2] / n]
    }

    /// Axis-aligned bounds `(min, max)`; `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn same_topology(&self, other: &TriMesh) -> Result<()> {
        if self.vertices.len() != other.vertices.len() || self.faces != other.faces {
            return Err(Error::TopologyMismatch(format!(
                "{}v/{}f vs {}v/{}f",
                self.vertices.len(),
                self.faces.len(),
                other.vertices.len(),
                other.faces.len()
            )));
        }
        Ok(())
    }
}

fn check_face(vertices: &[[f64; 3]], f: &[usize; 3]) -> std::result::Result<(), String> {
    for &i in f {
        if i >= vertices.len() {
            return Err(format!("index {} out of range for {} vertices", i + 1, vertices.len()));
        }
    }
    if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
        return Err("repeated vertex index".into());
    }
    let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
    let area = 0.5 * norm3(cross3(sub3(b, a), sub3(c, a)));
    if !(area > MIN_FACE_AREA) {
        return Err(format!("degenerate triangle (area {area:e})"));
    }
    Ok(())
}

fn parse_index(tok: &str, nverts: usize, line: usize) -> Result<usize> {
    let head = tok.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| Error::parse(line, format!("bad face index `{tok}`")))?;
    let idx = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        nverts as i64 + raw
    } else {
        return Err(Error::parse(line, "face index 0 is invalid (indices are 1-based)"));
    };
    if idx < 0 || idx as usize >= nverts {
        return Err(Error::parse(line, format!("face index {raw} out of range ({nverts} vertices so far)")));
    }
    Ok(idx as usize)
}

/// Parses ASCII OBJ text. Only `v` and `f` records are interpreted; polygons
/// are fan-triangulated around their first corner.
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut p = [0.0f64; 3];
                for slot in p.iter_mut() {
                    let t = toks.next().ok_or_else(|| Error::parse(line, "vertex needs 3 coordinates"))?;
                    *slot = t.parse().map_err(|_| Error::parse(line, format!("bad coordinate `{t}`")))?;
                    if !slot.is_finite() {
                        return Err(Error::parse(line, "non-finite coordinate"));
                    }
                }
                vertices.push(p);
            }
            Some("f") => {
                let idx = toks.map(|t| parse_index(t, vertices.len(), line)).collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(Error::parse(line, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    let f = [idx[0], idx[k], idx[k + 1]];
                    check_face(&vertices, &f).map_err(|m| Error::parse(line, m))?;
                    faces.push(f);
                }
            }
            _ => {}
        }
    }
    Ok(TriMesh { vertices, faces })
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

/// Shortest round-trip decimal formatting, so save/load is exact.
pub fn format_obj(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(32 * (mesh.vertices.len() + mesh.faces.len()));
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_obj(mesh)).map_err(|e| Error::io(path, e))
}

/// One-ring adjacency built from face edges. Isolated vertices get an empty set.
pub fn vertex_neighbors(mesh: &TriMesh) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); mesh.vertices.len()];
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    adj
}
