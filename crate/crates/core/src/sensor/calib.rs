use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::diff::{Scalar, V3};
use crate::error::{Error, Result};

/// 3×4 projection from homogeneous LiDAR-frame points to homogeneous pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub projection: [[f64; 4]; 3],
}

impl Calibration {
    pub fn new(projection: [[f64; 4]; 3]) -> Result<Self> {
        if projection.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite projection entry".into()));
        }
        let c = Self { projection };
        if c.left_block().determinant().abs() < 1e-12 {
            return Err(Error::InvalidArgument("projection has a singular 3x3 block".into()));
        }
        Ok(c)
    }

    /// Pinhole camera with focal length `f` pixels and principal point
    /// `(cx, cy)`, looking along LiDAR +x from `center` (LiDAR frame), image
    /// x to the right (LiDAR −y) and image y down (LiDAR −z).
    pub fn pinhole(f: f64, cx: f64, cy: f64, center: [f64; 3]) -> Self {
        // camera axes expressed in LiDAR coordinates
        let r = [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]];
        let k = [[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]];
        let t: Vec<f64> = (0..3).map(|i| -(0..3).map(|j| r[i][j] * center[j]).sum::<f64>()).collect();
        let mut p = [[0.0; 4]; 3];
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] = (0..3).map(|m| k[i][m] * r[m][j]).sum();
            }
            p[i][3] = (0..3).map(|m| k[i][m] * t[m]).sum();
        }
        Self { projection: p }
    }

    fn left_block(&self) -> Matrix3<f64> {
        let p = &self.projection;
        Matrix3::new(p[0][0], p[0][1], p[0][2], p[1][0], p[1][1], p[1][2], p[2][0], p[2][1], p[2][2])
    }

    /// Optical centre in the LiDAR frame.
    pub fn camera_center(&self) -> [f64; 3] {
        let p = &self.projection;
        let inv = self.left_block().try_inverse().expect("checked non-singular");
        let c = -(inv * Vector3::new(p[0][3], p[1][3], p[2][3]));
        [c[0], c[1], c[2]]
    }

    /// Unit viewing direction (increasing depth) in the LiDAR frame.
    pub fn optical_axis(&self) -> [f64; 3] {
        let r = self.projection[2];
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        [r[0] / n, r[1] / n, r[2] / n]
    }

    pub fn depth(&self, p: [f64; 3]) -> f64 {
        let r = self.projection[2];
        r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + r[3]
    }
}

/// Perspective projection; errors for points with non-positive depth.
pub fn project_point<S: Scalar>(calib: &Calibration, p: &V3<S>) -> Result<[S; 2]> {
    let row = |r: &[f64; 4]| p.dot_f([r[0], r[1], r[2]]) + r[3];
    let w = row(&calib.projection[2]);
    if w.val() <= 0.0 {
        return Err(Error::BehindCamera { depth: w.val() });
    }
    Ok([row(&calib.projection[0]) / w, row(&calib.projection[1]) / w])
}

pub fn parse_calibration(text: &str) -> Result<Calibration> {
    for (ln, line) in text.lines().enumerate() {
        let Some(rest) = line.trim_start().strip_prefix("P:") else { continue };
        let vals = rest
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(ln + 1, format!("bad number `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != 12 {
            return Err(Error::parse(ln + 1, format!("expected 12 values after `P:`, found {}", vals.len())));
        }
        let mut p = [[0.0; 4]; 3];
        for (k, v) in vals.into_iter().enumerate() {
            p[k / 4][k % 4] = v;
        }
        return Calibration::new(p).map_err(|e| Error::parse(ln + 1, e.to_string()));
    }
    Err(Error::parse(0, "no `P:` line"))
}

pub fn format_calibration(c: &Calibration) -> String {
    let vals: Vec<String> = c.projection.iter().flatten().map(|v| format!("{v}")).collect();
    format!("P: {}\n", vals.join(" "))
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<Calibration> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(&text)
}

pub fn save_calibration(c: &Calibration, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_calibration(c)).map_err(|e| Error::io(path, e))
}
