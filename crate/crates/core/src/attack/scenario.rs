use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sensor::{
    load_calibration, load_point_cloud, load_ppm, save_calibration, save_point_cloud, save_ppm, ground_scan,
    Calibration, Image, LidarSpec, PointCloud, SensorImage,
};

/// Ground-plane position of the object: meters, meters, degrees.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    pub yaw_deg: f64,
}

impl Placement {
    pub fn new(x: f64, y: f64, yaw_deg: f64) -> Self {
        Self { x, y, yaw_deg }
    }
}

/// One frame of sensor inputs plus where the object goes.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub background: PointCloud,
    pub image: SensorImage,
    pub calib: Calibration,
    /// LiDAR-frame height of the road surface (negative: sensor above road).
    pub ground_z: f64,
    pub placement: Placement,
}

pub const SCENE_FILES: [&str; 4] = ["pc.bin", "image.ppm", "calib.txt", "scene.cfg"];

pub fn parse_scene_cfg(text: &str) -> Result<(f64, Placement)> {
    let (mut ground, mut placement) = (None, None);
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(ln, "expected `key = value`"))?;
        let nums: Vec<f64> = v
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if nums.iter().any(|n| !n.is_finite()) {
            return Err(Error::parse(ln, "non-finite value"));
        }
        match (k.trim(), nums.as_slice()) {
            ("ground_z", &[g]) => ground = Some(g),
            ("placement", &[x, y, yaw]) => placement = Some(Placement::new(x, y, yaw)),
            ("ground_z", _) => return Err(Error::parse(ln, "`ground_z` takes one value")),
            ("placement", _) => return Err(Error::parse(ln, "`placement` takes `x y yaw_deg`")),
            (k, _) => return Err(Error::parse(ln, format!("unknown key `{k}`"))),
        }
    }
    let ground = ground.ok_or_else(|| Error::parse(0, "missing `ground_z`"))?;
    let placement = placement.ok_or_else(|| Error::parse(0, "missing `placement`"))?;
    Ok((ground, placement))
}

pub fn format_scene_cfg(ground_z: f64, p: &Placement) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ground_z = {ground_z}");
    let _ = writeln!(s, "placement = {} {} {}", p.x, p.y, p.yaw_deg);
    s
}

/// One `x y yaw_deg` placement per line; `#` starts a comment.
pub fn parse_poses(text: &str) -> Result<Vec<Placement>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        match v.as_slice() {
            &[x, y, yaw] if v.iter().all(|c| c.is_finite()) => out.push(Placement::new(x, y, yaw)),
            &[_, _, _] => return Err(Error::parse(i + 1, "non-finite value")),
            _ => return Err(Error::parse(i + 1, format!("expected `x y yaw_deg`, got {} values", v.len()))),
        }
    }
    Ok(out)
}

pub fn format_poses(poses: &[Placement]) -> String {
    poses.iter().map(|p| format!("{} {} {}\n", p.x, p.y, p.yaw_deg)).collect()
}

impl Scenario {
    /// Reads a scenario directory; a missing file is reported by name.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        for f in SCENE_FILES {
            if !dir.join(f).is_file() {
                return Err(Error::InvalidArgument(format!("scenario {} is missing {f}", dir.display())));
            }
        }
        let background = load_point_cloud(dir.join("pc.bin"))?;
        let image = load_ppm(dir.join("image.ppm"))?;
        let calib = load_calibration(dir.join("calib.txt"))?;
        let cfg_path = dir.join("scene.cfg");
        let text = std::fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        let (ground_z, placement) = parse_scene_cfg(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::parse(line, format!("scene.cfg: {msg}")),
            e => e,
        })?;
        let s = Self { background, image, calib, ground_z, placement };
        s.check()?;
        Ok(s)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_point_cloud(&self.background, dir.join("pc.bin"))?;
        save_ppm(&self.image, dir.join("image.ppm"))?;
        save_calibration(&self.calib, dir.join("calib.txt"))?;
        let cfg = dir.join("scene.cfg");
        std::fs::write(&cfg, format_scene_cfg(self.ground_z, &self.placement)).map_err(|e| Error::io(&cfg, e))
    }

    /// The placement must be visible: in front of the camera and inside the image.
    pub fn check(&self) -> Result<()> {
        let p = [self.placement.x, self.placement.y, self.ground_z];
        if self.calib.depth(p) <= 0.0 {
            return Err(Error::InvalidArgument("placement is behind the camera".into()));
        }
        Ok(())
    }
}

/// Flat-road frame: a ground-plane scan from the default scanner, a sky/road
/// image and a camera slightly below the LiDAR looking along +x.
pub fn synthetic_scenario() -> Scenario {
    let ground_z = -1.73;
    let spec = LidarSpec::default();
    // stored as f32 on disk; keep the in-memory copy identical
    let mut background = ground_scan(&spec, ground_z, 0.15);
    for p in &mut background.points {
        p.xyz = p.xyz.map(|c| c as f32 as f64);
        p.intensity = p.intensity as f32 as f64;
    }
    let (w, h, horizon) = (640usize, 480usize, 240usize);
    let mut image = Image::filled(w, h, [0.0; 3]);
    for y in 0..h {
        let rgb = if y < horizon {
            let t = y as f64 / horizon as f64;
            [0.45 + 0.35 * t, 0.6 + 0.25 * t, 0.85 + 0.1 * t]
        } else {
            let t = (y - horizon) as f64 / (h - horizon) as f64;
            let g = 0.3 + 0.1 * t;
            [g, g, g * 1.02]
        };
        for x in 0..w {
            image.set_pixel(x, y, rgb.map(|v: f64| (v * 255.0).round() / 255.0));
        }
    }
    Scenario {
        background,
        image,
        calib: Calibration::pinhole(500.0, 320.0, 240.0, [0.0, 0.0, -0.08]),
        ground_z,
        placement: Placement::new(7.0, 0.0, 0.0),
    }
}
