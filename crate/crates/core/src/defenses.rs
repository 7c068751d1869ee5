//! Input-transformation defenses (bit-depth reduction, median smoothing)
//! and a sweep that measures their effect on benign and adversarial objects.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::attack::{confidences, lift_vertices, render_pose, Placement, PoseInputs, PoseSetup, SceneContext, Surrogates};
use crate::error::{Error, Result};
use crate::features::Aabb;
use crate::geometry::TriMesh;
use crate::sensor::{Image, LidarPoint, LidarSpec, PointCloud, Ray, SensorImage};
use crate::surrogate::fuse_rule;

fn check_bits(bits: u32) -> Result<f64> {
    if !(1..=8).contains(&bits) {
        return Err(Error::InvalidArgument(format!("bits must be in 1..=8, got {bits}")));
    }
    Ok(((1u32 << bits) - 1) as f64)
}

fn quantize(x: f64, levels: f64) -> f64 {
    (x * levels).round() / levels
}

/// `round(x·(2^bits − 1)) / (2^bits − 1)` per value, halves rounded away from zero.
pub fn bit_depth_reduce(values: &[f64], bits: u32) -> Result<Vec<f64>> {
    let levels = check_bits(bits)?;
    Ok(values.iter().map(|&x| quantize(x, levels)).collect())
}

pub fn bit_depth_image(img: &SensorImage, bits: u32) -> Result<SensorImage> {
    Ok(Image { width: img.width, height: img.height, data: bit_depth_reduce(&img.data, bits)? })
}

/// Quantizes x, y, z after normalizing by `roi` and intensity as is; points
/// outside `roi` are left unchanged.
pub fn bit_depth_point_cloud(pc: &PointCloud, roi: &Aabb, bits: u32) -> Result<PointCloud> {
    let levels = check_bits(bits)?;
    let points = pc
        .points
        .iter()
        .map(|p| {
            if !roi.contains(p.xyz) {
                return *p;
            }
            let xyz = [0, 1, 2].map(|d| {
                let ext = roi.hi[d] - roi.lo[d];
                if ext <= 0.0 {
                    return p.xyz[d];
                }
                roi.lo[d] + quantize((p.xyz[d] - roi.lo[d]) / ext, levels) * ext
            });
            LidarPoint { xyz, intensity: quantize(p.intensity, levels) }
        })
        .collect();
    Ok(PointCloud { points })
}

fn check_kernel(k: usize) -> Result<isize> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidArgument(format!("median kernel must be odd and positive, got {k}")));
    }
    Ok((k / 2) as isize)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Per-channel k×k median with edge replication.
pub fn median_smooth(img: &SensorImage, k: usize) -> Result<SensorImage> {
    let r = check_kernel(k)?;
    if r == 0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width as isize, img.height as isize);
    let mut data = vec![0.0; img.data.len()];
    data.par_chunks_mut(3 * img.width).enumerate().for_each(|(y, row)| {
        let mut win = Vec::with_capacity(k * k);
        for x in 0..img.width {
            for c in 0..3 {
                win.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let yy = (y as isize + dy).clamp(0, h - 1) as usize;
                        let xx = (x as isize + dx).clamp(0, w - 1) as usize;
                        win.push(img.data[img.idx(xx, yy) + c]);
                    }
                }
                row[3 * x + c] = median(&mut win);
            }
        }
    });
    Ok(Image { width: img.width, height: img.height, data })
}

/// Median of ranges over the k×k neighbourhood of each point on the scan
/// grid (elevation × azimuth); every point is moved along its own ray to
/// that range. Grid edges replicate in elevation and wrap in azimuth; empty
/// neighbour rays are skipped. Intensity is smoothed the same way.
pub fn median_smooth_point_cloud(pc: &PointCloud, spec: &LidarSpec, k: usize) -> Result<PointCloud> {
    let r = check_kernel(k)?;
    if r == 0 {
        return Ok(pc.clone());
    }
    let range = |p: &LidarPoint| (p.xyz[0] * p.xyz[0] + p.xyz[1] * p.xyz[1] + p.xyz[2] * p.xyz[2]).sqrt();
    let mut by_ray: HashMap<Ray, (f64, f64)> = HashMap::new();
    let rays: Vec<Option<Ray>> = pc
        .points
        .iter()
        .map(|p| {
            let rg = range(p);
            (rg > 0.0).then(|| {
                let ray = spec.nearest_ray(p.xyz);
                let e = by_ray.entry(ray).or_insert((rg, p.intensity));
                if rg < e.0 {
                    *e = (rg, p.intensity);
                }
                ray
            })
        })
        .collect();
    let nc = spec.channels.len() as isize;
    let na = spec.azimuth_steps() as isize;
    let points = pc
        .points
        .iter()
        .zip(&rays)
        .map(|(p, ray)| {
            let Some(ray) = ray else { return *p };
            let (mut rs, mut is) = (Vec::new(), Vec::new());
            for dc in -r..=r {
                let c = (ray.channel as isize + dc).clamp(0, nc - 1) as u32;
                for da in -r..=r {
                    let a = (ray.azimuth as isize + da).rem_euclid(na) as u32;
                    if let Some(&(rg, i)) = by_ray.get(&Ray { channel: c, azimuth: a }) {
                        rs.push(rg);
                        is.push(i);
                    }
                }
            }
            let scale = median(&mut rs) / range(p);
            LidarPoint { xyz: p.xyz.map(|v| v * scale), intensity: median(&mut is) }
        })
        .collect();
    Ok(PointCloud { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefenseKind {
    BitDepth,
    Median,
}

/// Which sensor inputs a defense is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefenseTarget {
    Camera,
    Lidar,
    Both,
}

impl DefenseTarget {
    fn camera(self) -> bool {
        matches!(self, DefenseTarget::Camera | DefenseTarget::Both)
    }

    fn lidar(self) -> bool {
        matches!(self, DefenseTarget::Lidar | DefenseTarget::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseRow {
    pub parameter: u32,
    pub benign_rate: f64,
    pub attack_rate: f64,
}

pub fn sweep_csv(rows: &[DefenseRow]) -> String {
    let mut s = String::from("parameter,benign_rate,attack_rate\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.parameter, r.benign_rate, r.attack_rate));
    }
    s
}

/// Applies a defense to rendered inputs (ground-referenced ROI points and the camera crop).
pub fn apply_defense(
    inputs: &PoseInputs<f64>,
    setup: &PoseSetup,
    spec: &LidarSpec,
    ground_z: f64,
    kind: DefenseKind,
    target: DefenseTarget,
    parameter: u32,
) -> Result<PoseInputs<f64>> {
    let mut out = inputs.clone();
    if target.camera() {
        out.crop = match kind {
            DefenseKind::BitDepth => bit_depth_image(&inputs.crop, parameter)?,
            DefenseKind::Median => median_smooth(&inputs.crop, parameter as usize)?,
        };
    }
    if target.lidar() {
        // back to the sensor frame, where the ROI box and the scan grid live
        let sensor = PointCloud {
            points: inputs.points.iter().map(|p| LidarPoint { xyz: [p.xyz[0], p.xyz[1], p.xyz[2] + ground_z], ..*p }).collect(),
        };
        let done = match kind {
            DefenseKind::BitDepth => bit_depth_point_cloud(&sensor, &setup.roi, parameter)?,
            DefenseKind::Median => median_smooth_point_cloud(&sensor, spec, parameter as usize)?,
        };
        // untouched points keep their exact ground-referenced coordinates
        out.points = done
            .points
            .iter()
            .zip(&sensor.points)
            .zip(&inputs.points)
            .map(|((d, s), orig)| if d == s { *orig } else { LidarPoint { xyz: [d.xyz[0], d.xyz[1], d.xyz[2] - ground_z], ..*d } })
            .collect();
    }
    Ok(out)
}

fn detected(
    mesh: &TriMesh,
    ctx: &SceneContext,
    s: &Surrogates,
    setup: &PoseSetup,
    defense: Option<(DefenseKind, DefenseTarget, u32)>,
) -> Result<bool> {
    let mut inputs = render_pose(&lift_vertices::<f64>(mesh), mesh.faces(), ctx, &s.geometry, setup)?;
    if let Some((kind, target, p)) = defense {
        inputs = apply_defense(&inputs, setup, &ctx.lidar.spec, ctx.scenario.ground_z, kind, target, p)?;
    }
    let (l, c) = confidences(&inputs, s, setup)?;
    Ok(fuse_rule(l, c, &s.weights))
}

/// Benign detection rate and attack success rate at every pose, once per
/// defense parameter. `None` in `parameters` means no defense.
pub fn evaluate_defense(
    adv: &TriMesh,
    benign: &TriMesh,
    ctx: &SceneContext,
    s: &Surrogates,
    kind: DefenseKind,
    target: DefenseTarget,
    parameters: &[u32],
    poses: &[Placement],
) -> Result<Vec<DefenseRow>> {
    if parameters.is_empty() {
        return Err(Error::InvalidArgument("empty defense sweep".into()));
    }
    if poses.is_empty() {
        return Err(Error::InvalidArgument("no evaluation poses".into()));
    }
    adv.same_topology(benign)?;
    let setups: Vec<PoseSetup> = poses.iter().map(|&p| PoseSetup::new(benign, &ctx.scenario, &s.geometry, p)).collect::<Result<_>>()?;
    parameters
        .iter()
        .map(|&p| {
            let flags: Vec<(bool, bool)> = setups
                .par_iter()
                .map(|setup| {
                    let d = Some((kind, target, p));
                    Ok((detected(benign, ctx, s, setup, d)?, detected(adv, ctx, s, setup, d)?))
                })
                .collect::<Result<_>>()?;
            let n = flags.len() as f64;
            Ok(DefenseRow {
                parameter: p,
                benign_rate: flags.iter().filter(|f| f.0).count() as f64 / n,
                attack_rate: flags.iter().filter(|f| !f.1).count() as f64 / n,
            })
        })
        .collect()
}

/// The same two rates without any defense.
pub fn undefended_rates(adv: &TriMesh, benign: &TriMesh, ctx: &SceneContext, s: &Surrogates, poses: &[Placement]) -> Result<(f64, f64)> {
    let flags: Vec<(bool, bool)> = poses
        .par_iter()
        .map(|&p| {
            let setup = PoseSetup::new(benign, &ctx.scenario, &s.geometry, p)?;
            Ok((detected(benign, ctx, s, &setup, None)?, detected(adv, ctx, s, &setup, None)?))
        })
        .collect::<Result<_>>()?;
    let n = flags.len().max(1) as f64;
    Ok((flags.iter().filter(|f| f.0).count() as f64 / n, flags.iter().filter(|f| !f.1).count() as f64 / n))
}
