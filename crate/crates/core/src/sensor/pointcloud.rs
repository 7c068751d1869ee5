use std::path::Path;

use crate::diff::Scalar;
use crate::error::{Error, Result};

/// One LiDAR return: position in meters (LiDAR frame) and intensity in [0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint<S = f64> {
    pub xyz: [S; 3],
    pub intensity: S,
}

impl LidarPoint<f64> {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { xyz: [x, y, z], intensity }
    }

    pub fn lift<S: Scalar>(&self) -> LidarPoint<S> {
        LidarPoint { xyz: self.xyz.map(S::cst), intensity: S::cst(self.intensity) }
    }
}

impl<S: Scalar> LidarPoint<S> {
    pub fn value(&self) -> LidarPoint<f64> {
        LidarPoint { xyz: self.xyz.map(|c| c.val()), intensity: self.intensity.val() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<S = f64> {
    pub points: Vec<LidarPoint<S>>,
}

impl<S> PointCloud<S> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl PointCloud<f64> {
    pub fn new(points: Vec<LidarPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            validate_point(p).map_err(|m| Error::InvalidArgument(format!("point {i}: {m}")))?;
        }
        Ok(Self { points })
    }

    pub fn lift<S: Scalar>(&self) -> PointCloud<S> {
        PointCloud { points: self.points.iter().map(|p| p.lift()).collect() }
    }
}

impl<S: Scalar> PointCloud<S> {
    pub fn value(&self) -> PointCloud<f64> {
        PointCloud { points: self.points.iter().map(|p| p.value()).collect() }
    }
}

fn validate_point(p: &LidarPoint) -> std::result::Result<(), String> {
    if p.xyz.iter().any(|c| !c.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    if !(0.0..=1.0).contains(&p.intensity) {
        return Err(format!("intensity {} outside [0,1]", p.intensity));
    }
    Ok(())
}

/// Decodes KITTI-style little-endian f32 quadruples `(x, y, z, intensity)`.
pub fn decode_point_cloud(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.len() % 16 != 0 {
        return Err(Error::parse(0, format!("{} bytes is not a whole number of 16-byte points", bytes.len())));
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    for (i, chunk) in bytes.chunks_exact(16).enumerate() {
        let f = |k: usize| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().expect("4 bytes")) as f64;
        let p = LidarPoint::new(f(0), f(1), f(2), f(3));
        validate_point(&p).map_err(|m| Error::parse(i + 1, format!("point {i}: {m}")))?;
        points.push(p);
    }
    Ok(PointCloud { points })
}

pub fn encode_point_cloud(pc: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(pc.points.len() * 16);
    for p in &pc.points {
        for v in [p.xyz[0], p.xyz[1], p.xyz[2], p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_point_cloud(&bytes)
}

pub fn save_point_cloud(pc: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_point_cloud(pc)).map_err(|e| Error::io(path, e))
}
