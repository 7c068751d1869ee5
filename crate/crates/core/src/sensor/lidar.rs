use std::collections::{BTreeMap, HashMap};

use crate::diff::vec3::{dot3, norm3, sub3};
use crate::diff::{Scalar, V3};
use crate::error::{Error, Result};
use crate::geometry::TriMesh;

use super::pointcloud::{LidarPoint, PointCloud};
use super::raycast::intersect_f64;

/// Spinning multi-beam scanner model, sensor at the LiDAR-frame origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarSpec {
    /// Beam elevations in degrees, ascending.
    pub channels: Vec<f64>,
    pub azimuth_resolution: f64,
    pub max_range: f64,
    pub object_intensity: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self::uniform(64, -24.9, 2.0, 0.17, 120.0, 0.4).expect("valid default")
    }
}

impl LidarSpec {
    pub fn new(channels: Vec<f64>, azimuth_resolution: f64, max_range: f64, object_intensity: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("lidar spec: {m}")));
        if channels.is_empty() {
            return bad("no channels");
        }
        if channels.iter().any(|c| !c.is_finite() || c.abs() >= 90.0) {
            return bad("channel elevation outside (-90, 90)");
        }
        if channels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("channels not strictly ascending");
        }
        if !(azimuth_resolution > 0.0 && azimuth_resolution <= 360.0) {
            return bad("azimuth resolution must be in (0, 360]");
        }
        if !(max_range > 0.0 && max_range.is_finite()) {
            return bad("max range must be positive");
        }
        if !(0.0..=1.0).contains(&object_intensity) {
            return bad("object intensity outside [0,1]");
        }
        Ok(Self { channels, azimuth_resolution, max_range, object_intensity })
    }

    /// `n` channels evenly spaced from `lo` to `hi` degrees.
    pub fn uniform(n: usize, lo: f64, hi: f64, az_res: f64, max_range: f64, intensity: f64) -> Result<Self> {
        let channels = if n == 1 { vec![lo] } else { (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect() };
        Self::new(channels, az_res, max_range, intensity)
    }

    pub fn azimuth_steps(&self) -> usize {
        (360.0 / self.azimuth_resolution).ceil() as usize
    }

    pub fn ray_direction(&self, ray: Ray) -> [f64; 3] {
        let el = self.channels[ray.channel as usize].to_radians();
        let az = (ray.azimuth as f64 * self.azimuth_resolution).to_radians();
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }

    /// Ray whose (elevation, azimuth) cell contains direction `d`.
    pub fn nearest_ray(&self, d: [f64; 3]) -> Ray {
        let el = d[2].atan2(d[0].hypot(d[1])).to_degrees();
        let i = self.channels.partition_point(|&c| c < el);
        let channel = if i == 0 {
            0
        } else if i == self.channels.len() || el - self.channels[i - 1] <= self.channels[i] - el {
            i - 1
        } else {
            i
        };
        let n = self.azimuth_steps() as i64;
        let az = d[1].atan2(d[0]).to_degrees().rem_euclid(360.0);
        let azimuth = ((az / self.azimuth_resolution).round() as i64).rem_euclid(n);
        Ray { channel: channel as u32, azimuth: azimuth as u32 }
    }

    /// Every ray of the scan pattern.
    pub fn rays(&self) -> impl Iterator<Item = Ray> + '_ {
        let n = self.azimuth_steps() as u32;
        (0..self.channels.len() as u32).flat_map(move |channel| (0..n).map(move |azimuth| Ray { channel, azimuth }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ray {
    pub channel: u32,
    pub azimuth: u32,
}

/// Background scan binned onto the ray grid, reusable across renders.
#[derive(Debug, Clone)]
pub struct LidarScene {
    pub spec: LidarSpec,
    pub background: PointCloud,
    /// Ray → (index of the nearest background point in that cell, its range).
    slots: HashMap<Ray, (usize, f64)>,
}

/// Outcome of one LiDAR render.
#[derive(Debug, Clone)]
pub struct LidarRender<S> {
    pub cloud: PointCloud<S>,
    /// Indices in `cloud` of points that lie on the object.
    pub object_points: Vec<usize>,
    /// Object hits on rays without a background return (appended at the end).
    pub appended: usize,
}

impl LidarScene {
    pub fn new(background: PointCloud, spec: LidarSpec) -> Self {
        let mut slots: HashMap<Ray, (usize, f64)> = HashMap::new();
        for (i, p) in background.points.iter().enumerate() {
            let r = norm3(p.xyz);
            if r == 0.0 {
                continue;
            }
            let ray = spec.nearest_ray(p.xyz);
            let e = slots.entry(ray).or_insert((i, r));
            if r < e.1 {
                *e = (i, r);
            }
        }
        Self { spec, background, slots }
    }

    /// Range of the background return on `ray`, if any.
    pub fn background_range(&self, ray: Ray) -> Option<f64> {
        self.slots.get(&ray).map(|s| s.1)
    }

    /// Nearest object hit per ray whose hit beats the background return.
    pub fn object_hits(&self, vertices: &[[f64; 3]], faces: &[[usize; 3]]) -> BTreeMap<Ray, (f64, usize, f64, f64)> {
        let mut best: HashMap<Ray, (f64, usize, f64, f64)> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            let tri = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
            for ray in candidate_rays(&self.spec, &tri) {
                let d = self.spec.ray_direction(ray);
                if let Some(h) = intersect_f64([0.0; 3], d, &tri) {
                    if h.t > self.spec.max_range {
                        continue;
                    }
                    let e = best.entry(ray).or_insert((f64::INFINITY, 0, 0.0, 0.0));
                    if h.t < e.0 || (h.t == e.0 && fi < e.1) {
                        *e = (h.t, fi, h.b1, h.b2);
                    }
                }
            }
        }
        best.into_iter()
            .filter(|(ray, (t, ..))| self.background_range(*ray).map_or(true, |bg| *t < bg))
            .collect()
    }

    /// Replaces background returns by object hits; hit coordinates are
    /// attached to the surface at fixed barycentrics, so they follow the
    /// vertices while the hit set itself is held fixed.
    pub fn render<S: Scalar>(&self, vertices: &[V3<S>], faces: &[[usize; 3]]) -> LidarRender<S> {
        let plain: Vec<[f64; 3]> = vertices.iter().map(|v| v.val()).collect();
        let hits = self.object_hits(&plain, faces);
        let mut cloud: PointCloud<S> = self.background.lift();
        let mut object_points = Vec::with_capacity(hits.len());
        let mut appended = 0;
        let intensity = S::cst(self.spec.object_intensity);
        for (ray, (_, fi, b1, b2)) in hits {
            let f = faces[fi];
            let [v0, v1, v2] = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
            let b0 = 1.0 - b1 - b2;
            let xyz = [0, 1, 2].map(|k| S::linear(&[(v0.0[k], b0), (v1.0[k], b1), (v2.0[k], b2)]));
            let p = LidarPoint { xyz, intensity };
            match self.slots.get(&ray) {
                Some(&(idx, _)) => {
                    cloud.points[idx] = p;
                    object_points.push(idx);
                }
                None => {
                    object_points.push(cloud.points.len());
                    cloud.points.push(p);
                    appended += 1;
                }
            }
        }
        LidarRender { cloud, object_points, appended }
    }
}

impl LidarScene {
    /// Like [`LidarScene::render`] but only returns points for which `keep`
    /// holds on their forward coordinates; replaced background points are
    /// dropped and object points follow the background ones.
    pub fn render_filtered<S: Scalar>(
        &self,
        vertices: &[V3<S>],
        faces: &[[usize; 3]],
        keep: impl Fn([f64; 3]) -> bool,
    ) -> LidarRender<S> {
        let plain: Vec<[f64; 3]> = vertices.iter().map(|v| v.val()).collect();
        let hits = self.object_hits(&plain, faces);
        let replaced: std::collections::HashSet<usize> =
            hits.keys().filter_map(|ray| self.slots.get(ray).map(|s| s.0)).collect();
        let mut points: Vec<LidarPoint<S>> = self
            .background
            .points
            .iter()
            .enumerate()
            .filter(|(i, p)| keep(p.xyz) && !replaced.contains(i))
            .map(|(_, p)| p.lift())
            .collect();
        let mut object_points = Vec::new();
        let mut appended = 0;
        let intensity = S::cst(self.spec.object_intensity);
        for (ray, (_, fi, b1, b2)) in hits {
            let f = faces[fi];
            let b0 = 1.0 - b1 - b2;
            let pv = [0, 1, 2].map(|k| b0 * plain[f[0]][k] + b1 * plain[f[1]][k] + b2 * plain[f[2]][k]);
            if !keep(pv) {
                continue;
            }
            let [v0, v1, v2] = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
            let xyz = [0, 1, 2].map(|k| S::linear(&[(v0.0[k], b0), (v1.0[k], b1), (v2.0[k], b2)]));
            if !self.slots.contains_key(&ray) {
                appended += 1;
            }
            object_points.push(points.len());
            points.push(LidarPoint { xyz, intensity });
        }
        LidarRender { cloud: PointCloud { points }, object_points, appended }
    }
}

/// Rays that can possibly meet triangle `tri`, from conservative bounds on
/// its elevation and azimuth as seen from the origin.
fn candidate_rays(spec: &LidarSpec, tri: &[[f64; 3]; 3]) -> Vec<Ray> {
    let pad = 1e-9;
    let zmin = tri.iter().map(|v| v[2]).fold(f64::INFINITY, f64::min);
    let zmax = tri.iter().map(|v| v[2]).fold(f64::NEG_INFINITY, f64::max);
    let rh_max = tri.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    let rh_min = origin_distance_2d(tri);
    let el_hi = zmax.atan2(if zmax >= 0.0 { rh_min } else { rh_max }).to_degrees() + pad;
    let el_lo = zmin.atan2(if zmin >= 0.0 { rh_max } else { rh_min }).to_degrees() - pad;
    let c0 = spec.channels.partition_point(|&c| c < el_lo);
    let c1 = spec.channels.partition_point(|&c| c <= el_hi);
    if c0 >= c1 {
        return Vec::new();
    }
    let n = spec.azimuth_steps() as i64;
    let az_range: Vec<i64> = if rh_min <= 1e-12 {
        (0..n).collect()
    } else {
        let base = tri[0][1].atan2(tri[0][0]);
        let rel = tri.map(|v| {
            let mut d = v[1].atan2(v[0]) - base;
            d = (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
            d
        });
        let lo = rel.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo >= std::f64::consts::PI {
            (0..n).collect()
        } else {
            // ray k points at k·res degrees, k in 0..n, and n·res may
            // overshoot 360, so test the interval at each wrap separately
            let res = spec.azimuth_resolution;
            let (a_lo, a_hi) = ((base + lo).to_degrees(), (base + hi).to_degrees());
            let mut ks: Vec<i64> = [-360.0, 0.0, 360.0]
                .iter()
                .flat_map(|shift| {
                    let k0 = (((a_lo + shift) / res - pad).ceil() as i64).max(0);
                    let k1 = (((a_hi + shift) / res + pad).floor() as i64).min(n - 1);
                    k0..=k1
                })
                .collect();
            ks.sort_unstable();
            ks.dedup();
            ks
        }
    };
    let mut rays = Vec::with_capacity((c1 - c0) * az_range.len());
    for c in c0..c1 {
        for &k in &az_range {
            rays.push(Ray { channel: c as u32, azimuth: k as u32 });
        }
    }
    rays
}

/// Horizontal distance from the z axis to the triangle's xy projection.
fn origin_distance_2d(tri: &[[f64; 3]; 3]) -> f64 {
    let p = tri.map(|v| [v[0], v[1]]);
    let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    let s: Vec<f64> = (0..3).map(|i| cross(p[i], p[(i + 1) % 3])).collect();
    // origin x edge_i has consistent sign on every edge iff the origin is inside
    if s.iter().all(|&v| v >= 0.0) || s.iter().all(|&v| v <= 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|i| {
            let a = [p[i][0], p[i][1], 0.0];
            let b = [p[(i + 1) % 3][0], p[(i + 1) % 3][1], 0.0];
            let ab = sub3(b, a);
            let len2 = dot3(ab, ab);
            let t = if len2 > 0.0 { (-dot3(a, ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            norm3([a[0] + t * ab[0], a[1] + t * ab[1], 0.0])
        })
        .fold(f64::INFINITY, f64::min)
}

/// One-shot render of `mesh` into `background`.
pub fn render_lidar(mesh: &TriMesh, background: &PointCloud, spec: &LidarSpec) -> PointCloud {
    let scene = LidarScene::new(background.clone(), spec.clone());
    let verts: Vec<V3<f64>> = mesh.vertices().iter().map(|&v| V3(v)).collect();
    scene.render(&verts, mesh.faces()).cloud
}

/// Synthetic scan of a flat ground plane at height `ground_z` (negative,
/// sensor above ground): one return per downward ray within range.
pub fn ground_scan(spec: &LidarSpec, ground_z: f64, intensity: f64) -> PointCloud {
    let points = spec
        .rays()
        .filter_map(|ray| {
            let d = spec.ray_direction(ray);
            if d[2] >= 0.0 {
                return None;
            }
            let t = ground_z / d[2];
            (t > 0.0 && t <= spec.max_range).then(|| LidarPoint::new(t * d[0], t * d[1], ground_z, intensity))
        })
        .collect();
    PointCloud { points }
}
