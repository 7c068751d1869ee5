//! Object placement, per-pose detector setup and the render → feature →
//! confidence chain shared by the attack, the baselines and the defenses.

use crate::diff::{Scalar, V3};
use crate::error::{Error, Result};
use crate::features::{bev_aggregate, derive_features, Aabb, CellGrid, FeatureGrid, TanhSharpness, DEFAULT_EPS_DIV};
use crate::geometry::TriMesh;
use crate::sensor::{
    project_point, render_camera_with, Calibration, Image, LidarPoint, LidarScene, LidarSpec, SensorImage,
};
use crate::surrogate::{
    camera_confidence, camera_patch, fit_surrogates, lidar_confidence, pooled_lidar_features, CalibrationSample,
    CellRect, DetectionRegion, PixelRect, SurrogateWeights,
};

use super::config::AttackConfig;
use super::scenario::{Placement, Scenario};

/// Fixed detector-side constants: BEV lattice, crop sizes, rendering looks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorGeometry {
    /// Horizontal cell edge, meters.
    pub cell: f64,
    pub cell_height: f64,
    pub layers: usize,
    /// Side of the pooled BEV region, in cells.
    pub region_cells: usize,
    /// Extra cells around the region on every side.
    pub margin_cells: usize,
    /// Height of the grid floor above the road; keeps road returns out.
    pub ground_clearance: f64,
    pub template_size: (usize, usize),
    pub blur_sigma: f64,
    pub albedo: [f64; 3],
    /// Fractional padding of the projected bounding box on each side.
    pub pixel_pad: f64,
    pub sharpness: TanhSharpness,
    pub eps_div: f64,
}

impl Default for DetectorGeometry {
    fn default() -> Self {
        Self {
            cell: 0.25,
            cell_height: 0.25,
            layers: 5,
            region_cells: 4,
            margin_cells: 1,
            ground_clearance: 0.05,
            template_size: (16, 16),
            blur_sigma: 0.7,
            albedo: [1.0, 0.45, 0.1],
            pixel_pad: 0.15,
            sharpness: TanhSharpness::default(),
            eps_div: DEFAULT_EPS_DIV,
        }
    }
}

impl DetectorGeometry {
    /// Copy with the feature sharpness and divisor taken from an attack config.
    pub fn with_config(mut self, c: &AttackConfig) -> Result<Self> {
        self.sharpness = TanhSharpness::new(c.mu)?;
        self.eps_div = c.eps_div;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogates {
    pub weights: SurrogateWeights,
    pub geometry: DetectorGeometry,
}

/// Scenario plus the scanner model and the binned background scan.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub scenario: Scenario,
    pub lidar: LidarScene,
}

impl SceneContext {
    pub fn new(scenario: Scenario, spec: LidarSpec) -> Self {
        let lidar = LidarScene::new(scenario.background.clone(), spec);
        Self { scenario, lidar }
    }
}

/// Object-frame point placed in the LiDAR frame: yaw about the object's
/// vertical axis, then a shift to `(x, y, ground_z)`.
pub fn place<S: Scalar>(p: &V3<S>, pose: &Placement, ground_z: f64) -> V3<S> {
    let (s, c) = pose.yaw_deg.to_radians().sin_cos();
    V3::new(
        S::linear(&[(p.x(), c), (p.y(), -s)]) + pose.x,
        S::linear(&[(p.x(), s), (p.y(), c)]) + pose.y,
        p.z() + ground_z,
    )
}

pub fn place_mesh(mesh: &TriMesh, pose: &Placement, ground_z: f64) -> TriMesh {
    let v = mesh.vertices().iter().map(|&p| place(&V3::<f64>(p), pose, ground_z).0).collect();
    mesh.with_vertices(v).expect("rigid motion keeps positions finite")
}

/// Everything about a pose that depends only on the benign object: the
/// feature grid, the ROI crop, both detection regions and the camera crop.
#[derive(Debug, Clone)]
pub struct PoseSetup {
    pub pose: Placement,
    /// Ground-referenced grid (z measured up from the road).
    pub grid: CellGrid,
    /// LiDAR-frame box of the grid.
    pub roi: Aabb,
    /// Pixel rectangle in the full image.
    pub image_rect: PixelRect,
    /// Region in grid and crop coordinates.
    pub region: DetectionRegion,
    pub crop: SensorImage,
    pub crop_calib: Calibration,
}

/// Projection that maps into a crop whose top-left pixel is `(x0, y0)`.
pub fn shifted_calibration(c: &Calibration, x0: f64, y0: f64) -> Calibration {
    let mut p = c.projection;
    for j in 0..4 {
        p[0][j] -= x0 * c.projection[2][j];
        p[1][j] -= y0 * c.projection[2][j];
    }
    Calibration { projection: p }
}

pub fn crop_image(img: &SensorImage, r: &PixelRect) -> SensorImage {
    let mut out = Image::filled(r.width(), r.height(), [0.0; 3]);
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            out.set_pixel(x - r.x0, y - r.y0, img.pixel(x, y));
        }
    }
    out
}

impl PoseSetup {
    pub fn new(benign: &TriMesh, scenario: &Scenario, g: &DetectorGeometry, pose: Placement) -> Result<Self> {
        if benign.is_empty() {
            return Err(Error::InvalidArgument("pose setup needs a non-empty benign mesh".into()));
        }
        let placed = place_mesh(benign, &pose, scenario.ground_z);

        let gx = (pose.x / g.cell).round() * g.cell;
        let gy = (pose.y / g.cell).round() * g.cell;
        let n = g.region_cells + 2 * g.margin_cells;
        let half = n as f64 * g.cell / 2.0;
        let grid = CellGrid::new([gx - half, gy - half, g.ground_clearance], [g.cell, g.cell, g.cell_height], [n, n, g.layers])?;
        let up = grid.upper();
        let roi = Aabb::new(
            [grid.origin[0], grid.origin[1], grid.origin[2] + scenario.ground_z],
            [up[0], up[1], up[2] + scenario.ground_z],
        )?;
        let (lo, hi) = placed.bounds().expect("non-empty");
        if (0..2).any(|d| lo[d] < roi.lo[d] || hi[d] > roi.hi[d]) {
            return Err(Error::RegionOutOfBounds(format!("object footprint {lo:?}..{hi:?} exceeds the BEV window")));
        }
        let (a, b) = (g.margin_cells, g.margin_cells + g.region_cells);
        let bev = CellRect { i0: a, j0: a, i1: b, j1: b };

        let img = &scenario.image;
        let mut px_lo = [f64::INFINITY; 2];
        let mut px_hi = [f64::NEG_INFINITY; 2];
        for v in placed.vertices() {
            let q = project_point(&scenario.calib, &V3::<f64>(*v))?;
            for d in 0..2 {
                px_lo[d] = px_lo[d].min(q[d]);
                px_hi[d] = px_hi[d].max(q[d]);
            }
        }
        let pad = [0, 1].map(|d| g.pixel_pad * (px_hi[d] - px_lo[d]));
        let clamp = |v: f64, n: usize| v.clamp(0.0, n as f64) as usize;
        let image_rect = PixelRect {
            x0: clamp((px_lo[0] - pad[0]).floor(), img.width),
            y0: clamp((px_lo[1] - pad[1]).floor(), img.height),
            x1: clamp((px_hi[0] + pad[0]).ceil(), img.width),
            y1: clamp((px_hi[1] + pad[1]).ceil(), img.height),
        };
        if image_rect.x0 >= image_rect.x1 || image_rect.y0 >= image_rect.y1 {
            return Err(Error::RegionOutOfBounds(format!("object at {pose:?} is outside the image")));
        }
        let crop = crop_image(img, &image_rect);
        let crop_calib = shifted_calibration(&scenario.calib, image_rect.x0 as f64, image_rect.y0 as f64);
        let region = DetectionRegion {
            bev,
            image: PixelRect { x0: 0, y0: 0, x1: image_rect.width(), y1: image_rect.height() },
        };
        Ok(Self { pose, grid, roi, image_rect, region, crop, crop_calib })
    }
}

/// Rendered and derived inputs of one pose.
#[derive(Debug, Clone)]
pub struct PoseInputs<S> {
    /// ROI points, ground-referenced.
    pub points: Vec<LidarPoint<S>>,
    pub crop: Image<S>,
}

/// Renders both sensors with the object in place.
pub fn render_pose<S: Scalar>(
    vertices: &[V3<S>],
    faces: &[[usize; 3]],
    ctx: &SceneContext,
    g: &DetectorGeometry,
    setup: &PoseSetup,
) -> Result<PoseInputs<S>> {
    let gz = ctx.scenario.ground_z;
    let placed: Vec<V3<S>> = vertices.iter().map(|v| place(v, &setup.pose, gz)).collect();
    let lidar = ctx.lidar.render_filtered(&placed, faces, |p| setup.roi.contains(p));
    let points = lidar
        .cloud
        .points
        .into_iter()
        .map(|p| LidarPoint { xyz: [p.xyz[0], p.xyz[1], p.xyz[2] - gz], intensity: p.intensity })
        .collect();
    let cam = render_camera_with(&placed, faces, &setup.crop, &setup.crop_calib, g.albedo, g.blur_sigma)?;
    Ok(PoseInputs { points, crop: cam.image })
}

/// BEV features of already rendered ROI points.
pub fn bev_features<S: Scalar>(points: &[LidarPoint<S>], g: &DetectorGeometry, setup: &PoseSetup) -> Result<FeatureGrid<S>> {
    let f = derive_features(points, &setup.grid, g.sharpness, g.eps_div)?;
    Ok(bev_aggregate(&f, g.eps_div))
}

/// Confidences of already rendered inputs: (LiDAR, camera).
pub fn confidences<S: Scalar>(inputs: &PoseInputs<S>, s: &Surrogates, setup: &PoseSetup) -> Result<(S, S)> {
    let bev = bev_features(&inputs.points, &s.geometry, setup)?;
    let cl = lidar_confidence(&bev, &setup.region, &s.weights)?;
    let cc = camera_confidence(&inputs.crop, &setup.region, &s.weights)?;
    Ok((cl, cc))
}

/// Both branch confidences for the object-frame mesh `vertices` at a pose.
pub fn evaluate_pose<S: Scalar>(
    vertices: &[V3<S>],
    faces: &[[usize; 3]],
    ctx: &SceneContext,
    s: &Surrogates,
    setup: &PoseSetup,
) -> Result<(S, S)> {
    let inputs = render_pose(vertices, faces, ctx, &s.geometry, setup)?;
    confidences(&inputs, s, setup)
}

pub fn lift_vertices<S: Scalar>(mesh: &TriMesh) -> Vec<V3<S>> {
    mesh.vertices().iter().map(|&v| V3::cst(v)).collect()
}

/// X positions of the present/absent calibration scenes.
pub const CALIBRATION_X: [f64; 5] = [5.0, 12.5, 20.0, 27.5, 35.0];

/// Branch observations for the benign object at `pose`, with or without it.
pub fn calibration_sample(
    benign: &TriMesh,
    ctx: &SceneContext,
    g: &DetectorGeometry,
    pose: Placement,
    present: bool,
) -> Result<CalibrationSample> {
    let setup = PoseSetup::new(benign, &ctx.scenario, g, pose)?;
    let shown = if present { benign.clone() } else { TriMesh::empty() };
    let inputs = render_pose(&lift_vertices::<f64>(&shown), shown.faces(), ctx, g, &setup)?;
    let bev = bev_features(&inputs.points, g, &setup)?;
    let lidar = pooled_lidar_features(&bev, &setup.region)?;
    let (tw, th) = g.template_size;
    let patch = camera_patch(&inputs.crop, &setup.region.image, tw, th)?;
    Ok(CalibrationSample { present, lidar, patch })
}

/// Fits both surrogates on the benign object at the calibration X positions
/// (straight ahead, no yaw) and on the same scenes without it.
pub fn calibrate_surrogates(benign: &TriMesh, ctx: &SceneContext, g: &DetectorGeometry) -> Result<Surrogates> {
    let mut samples = Vec::new();
    for present in [true, false] {
        for x in CALIBRATION_X {
            samples.push(calibration_sample(benign, ctx, g, Placement::new(x, 0.0, 0.0), present)?);
        }
    }
    let (tw, th) = g.template_size;
    let weights = fit_surrogates(&samples, tw, th)?;
    Ok(Surrogates { weights, geometry: *g })
}

/// Eight poses spanning the EoT ranges: four X stations at the centres of
/// equal quarters, each at half the lateral and yaw extent on both sides.
pub fn verification_poses(c: &AttackConfig) -> Vec<Placement> {
    let (x0, x1) = c.x_range;
    let mut out = Vec::with_capacity(8);
    for k in 0..4 {
        let x = x0 + (x1 - x0) * (k as f64 + 0.5) / 4.0;
        out.push(Placement::new(x, c.y_range.0 / 2.0, c.yaw_range.0 / 2.0));
        out.push(Placement::new(x, c.y_range.1 / 2.0, c.yaw_range.1 / 2.0));
    }
    out
}

/// Detection outcome at one pose.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PoseVerdict {
    pub pose: Placement,
    pub lidar: f64,
    pub camera: f64,
    pub detected: bool,
}

/// Evaluates `mesh` (object frame) at each pose; detection regions come from `benign`.
pub fn verify(mesh: &TriMesh, benign: &TriMesh, ctx: &SceneContext, s: &Surrogates, poses: &[Placement]) -> Result<Vec<PoseVerdict>> {
    use rayon::prelude::*;
    poses
        .par_iter()
        .map(|&pose| {
            let setup = PoseSetup::new(benign, &ctx.scenario, &s.geometry, pose)?;
            let (l, c) = evaluate_pose(&lift_vertices::<f64>(mesh), mesh.faces(), ctx, s, &setup)?;
            Ok(PoseVerdict { pose, lidar: l, camera: c, detected: crate::surrogate::fuse_rule(l, c, &s.weights) })
        })
        .collect()
}
