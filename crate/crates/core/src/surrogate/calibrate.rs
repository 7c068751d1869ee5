use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

use super::model::{ncc, SurrogateWeights};

/// Logit assigned to the weakest present case and the strongest absent case.
pub const CALIBRATION_MARGIN: f64 = 4.0;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Branch observations of one calibration scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSample {
    pub present: bool,
    pub lidar: [f64; 4],
    /// Grayscale patch at template resolution.
    pub patch: Vec<f64>,
}

/// Zero-mean, unit-norm copy of `raster`, or `None` if it is flat.
pub fn normalize_template(raster: &[f64]) -> Option<Vec<f64>> {
    let n = raster.len() as f64;
    let mean = raster.iter().sum::<f64>() / n;
    let c: Vec<f64> = raster.iter().map(|v| v - mean).collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 1e-9).then(|| c.iter().map(|v| v / norm).collect())
}

/// Scale and bias mapping the weakest present projection to `+margin` and
/// the strongest absent projection to `-margin`.
fn place(present: &[f64], absent: &[f64]) -> Option<(f64, f64)> {
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = absent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > hi + 1e-12) {
        return None;
    }
    let scale = 2.0 * CALIBRATION_MARGIN / (lo - hi);
    Some((scale, -CALIBRATION_MARGIN - scale * hi))
}

fn split<T: Copy>(samples: &[CalibrationSample], f: impl Fn(&CalibrationSample) -> T) -> (Vec<T>, Vec<T>) {
    let p = samples.iter().filter(|s| s.present).map(&f).collect();
    let a = samples.iter().filter(|s| !s.present).map(&f).collect();
    (p, a)
}

/// LiDAR direction: pooled within-class covariance (ridge-regularized)
/// applied to the class-mean difference; falls back to the plain mean
/// difference when that does not separate.
fn lidar_fit(samples: &[CalibrationSample]) -> Result<([f64; 4], f64)> {
    let (p, a) = split(samples, |s| Vector4::from(s.lidar));
    let mean = |v: &[Vector4<f64>]| v.iter().fold(Vector4::zeros(), |acc, x| acc + x) / v.len() as f64;
    let (mp, ma) = (mean(&p), mean(&a));
    let mut cov = Matrix4::zeros();
    for (set, m) in [(&p, mp), (&a, ma)] {
        for x in set {
            let d = x - m;
            cov += d * d.transpose();
        }
    }
    cov /= samples.len() as f64;
    let ridge = 1e-9 + 1e-6 * cov.trace();
    let diff = mp - ma;
    let mut dirs = Vec::new();
    if let Some(inv) = (cov + Matrix4::identity() * ridge).try_inverse() {
        dirs.push(inv * diff);
    }
    dirs.push(diff);
    for d in dirs {
        let proj = |v: &[Vector4<f64>]| v.iter().map(|x| d.dot(x)).collect::<Vec<f64>>();
        if let Some((scale, bias)) = place(&proj(&p), &proj(&a)) {
            let w = d * scale;
            return Ok(([w[0], w[1], w[2], w[3]], bias));
        }
    }
    Err(Error::Inseparable("LiDAR pooled features do not separate present from absent".into()))
}

/// Closed-form fit of both surrogates to labelled calibration scenes.
pub fn fit_surrogates(samples: &[CalibrationSample], template_width: usize, template_height: usize) -> Result<SurrogateWeights> {
    let n_present = samples.iter().filter(|s| s.present).count();
    if n_present == 0 || n_present == samples.len() {
        return Err(Error::Inseparable("calibration needs both present and absent scenes".into()));
    }
    let size = template_width * template_height;
    if size == 0 || samples.iter().any(|s| s.patch.len() != size) {
        return Err(Error::InvalidArgument(format!("calibration patches must have {size} values")));
    }
    let (lidar_weights, lidar_bias) = lidar_fit(samples)?;

    let mut mean_present = vec![0.0; size];
    for s in samples.iter().filter(|s| s.present) {
        for (m, v) in mean_present.iter_mut().zip(&s.patch) {
            *m += v / n_present as f64;
        }
    }
    let template = normalize_template(&mean_present)
        .ok_or_else(|| Error::Inseparable("mean present camera patch is featureless".into()))?;
    let (p, a) = split(samples, |s| ncc(&s.patch, &template));
    let (camera_scale, camera_bias) =
        place(&p, &a).ok_or_else(|| Error::Inseparable("camera correlations do not separate present from absent".into()))?;

    let w = SurrogateWeights {
        lidar_weights,
        lidar_bias,
        camera_scale,
        camera_bias,
        tau_lidar: DEFAULT_THRESHOLD,
        tau_camera: DEFAULT_THRESHOLD,
        template_width,
        template_height,
        template,
    };
    w.validate()?;
    Ok(w)
}
