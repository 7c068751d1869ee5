use std::fmt::Write as _;
use std::path::Path;

use crate::diff::Scalar;
use crate::error::{Error, Result};
use crate::features::{Channel, FeatureGrid};
use crate::sensor::Image;

/// Half-open rectangle of BEV columns `[i0, i1) × [j0, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub i0: usize,
    pub j0: usize,
    pub i1: usize,
    pub j1: usize,
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }
}

/// Where the object is expected in each branch's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionRegion {
    pub bev: CellRect,
    pub image: PixelRect,
}

pub const LIDAR_FEATURES: [&str; 4] = ["mean_occupancy", "mean_count", "height_max", "intensity_mean"];

/// Calibrated parameters of both surrogate detectors and the fusion rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateWeights {
    pub lidar_weights: [f64; 4],
    pub lidar_bias: f64,
    pub camera_scale: f64,
    pub camera_bias: f64,
    pub tau_lidar: f64,
    pub tau_camera: f64,
    pub template_width: usize,
    pub template_height: usize,
    /// Zero-mean, unit-norm grayscale raster, row-major.
    pub template: Vec<f64>,
}

impl SurrogateWeights {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("surrogate weights: {m}")));
        for (name, t) in [("tau_lidar", self.tau_lidar), ("tau_camera", self.tau_camera)] {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("{name} = {t} not in (0,1)"));
            }
        }
        let finite = self.lidar_weights.iter().chain([&self.lidar_bias, &self.camera_scale, &self.camera_bias]);
        if finite.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite coefficient".into());
        }
        if self.template_width == 0 || self.template_height == 0 {
            return bad("empty template".into());
        }
        if self.template.len() != self.template_width * self.template_height {
            return bad(format!("template has {} values for {}x{}", self.template.len(), self.template_width, self.template_height));
        }
        let mean = self.template.iter().sum::<f64>() / self.template.len() as f64;
        let norm = self.template.iter().map(|v| v * v).sum::<f64>().sqrt();
        if mean.abs() > 1e-9 || (norm - 1.0).abs() > 1e-9 {
            return bad(format!("template not normalized (mean {mean}, norm {norm})"));
        }
        Ok(())
    }
}

/// Region-pooled BEV features in [`LIDAR_FEATURES`] order.
pub fn pooled_lidar_features<S: Scalar>(features: &FeatureGrid<S>, region: &DetectionRegion) -> Result<[S; 4]> {
    let r = region.bev;
    let g = features.grid;
    if r.i0 >= r.i1 || r.j0 >= r.j1 || r.i1 > g.counts[0] || r.j1 > g.counts[1] {
        return Err(Error::RegionOutOfBounds(format!("BEV region {r:?} vs grid {:?}", g.counts)));
    }
    let cells: Vec<[usize; 3]> =
        (r.i0..r.i1).flat_map(|i| (r.j0..r.j1).map(move |j| [i, j, 0])).collect();
    let n = cells.len() as f64;
    let mean = |c: Channel| {
        let vals: Vec<S> = cells.iter().map(|&x| features.get(c, x)).collect();
        S::sum(&vals) / n
    };
    let hmax = cells.iter().map(|&x| features.get(Channel::HeightMax, x)).reduce(S::max).expect("non-empty");
    Ok([mean(Channel::Occupancy), mean(Channel::Count), hmax, mean(Channel::IntensityMean)])
}

/// Pre-sigmoid LiDAR score.
pub fn lidar_logit<S: Scalar>(features: &FeatureGrid<S>, region: &DetectionRegion, w: &SurrogateWeights) -> Result<S> {
    let f = pooled_lidar_features(features, region)?;
    let terms: Vec<(S, f64)> = f.iter().zip(&w.lidar_weights).map(|(&x, &c)| (x, c)).collect();
    Ok(S::linear(&terms) + w.lidar_bias)
}

pub fn lidar_confidence<S: Scalar>(features: &FeatureGrid<S>, region: &DetectionRegion, w: &SurrogateWeights) -> Result<S> {
    Ok(lidar_logit(features, region, w)?.sigmoid())
}

fn gray<S: Scalar>(img: &Image<S>, x: usize, y: usize) -> S {
    let i = img.idx(x, y);
    S::linear(&[(img.data[i], 0.299), (img.data[i + 1], 0.587), (img.data[i + 2], 0.114)])
}

/// Grayscale `rect` resampled to `width × height` by bilinear interpolation
/// between pixel centres.
pub fn camera_patch<S: Scalar>(img: &Image<S>, rect: &PixelRect, width: usize, height: usize) -> Result<Vec<S>> {
    if rect.x0 >= rect.x1 || rect.y0 >= rect.y1 || rect.x1 > img.width || rect.y1 > img.height {
        return Err(Error::RegionOutOfBounds(format!("pixel region {rect:?} vs image {}x{}", img.width, img.height)));
    }
    let coord = |k: usize, n: usize, lo: usize, hi: usize| -> (usize, usize, f64) {
        let s = lo as f64 + (k as f64 + 0.5) * (hi - lo) as f64 / n as f64 - 0.5;
        let s = s.clamp(lo as f64, (hi - 1) as f64);
        let a = s.floor() as usize;
        let b = (a + 1).min(hi - 1);
        (a, b, s - a as f64)
    };
    let mut out = Vec::with_capacity(width * height);
    for v in 0..height {
        let (ya, yb, fy) = coord(v, height, rect.y0, rect.y1);
        for u in 0..width {
            let (xa, xb, fx) = coord(u, width, rect.x0, rect.x1);
            out.push(S::linear(&[
                (gray(img, xa, ya), (1.0 - fx) * (1.0 - fy)),
                (gray(img, xb, ya), fx * (1.0 - fy)),
                (gray(img, xa, yb), (1.0 - fx) * fy),
                (gray(img, xb, yb), fx * fy),
            ]));
        }
    }
    Ok(out)
}

/// Variance below which a patch counts as featureless.
const FLAT_PATCH: f64 = 1e-12;

/// Normalized cross-correlation against a zero-mean unit-norm template.
pub fn ncc<S: Scalar>(patch: &[S], template: &[f64]) -> S {
    let n = patch.len() as f64;
    let mean = S::sum(patch) / n;
    let centred: Vec<S> = patch.iter().map(|&p| p - mean).collect();
    let sq: Vec<S> = centred.iter().map(|&c| c * c).collect();
    let ss = S::sum(&sq);
    if ss.val() < FLAT_PATCH {
        return S::cst(0.0);
    }
    let terms: Vec<(S, f64)> = centred.iter().zip(template).map(|(&c, &t)| (c, t)).collect();
    S::linear(&terms) / ss.sqrt()
}

pub fn camera_logit<S: Scalar>(img: &Image<S>, region: &DetectionRegion, w: &SurrogateWeights) -> Result<S> {
    let patch = camera_patch(img, &region.image, w.template_width, w.template_height)?;
    Ok(ncc(&patch, &w.template) * w.camera_scale + w.camera_bias)
}

pub fn camera_confidence<S: Scalar>(img: &Image<S>, region: &DetectionRegion, w: &SurrogateWeights) -> Result<S> {
    Ok(camera_logit(img, region, w)?.sigmoid())
}

/// OR fusion with inclusive thresholds.
pub fn fuse_rule(conf_lidar: f64, conf_camera: f64, w: &SurrogateWeights) -> bool {
    conf_lidar >= w.tau_lidar || conf_camera >= w.tau_camera
}

pub fn format_weights(w: &SurrogateWeights) -> String {
    let mut s = String::from("msfadv-surrogate 1\n");
    let lw: Vec<String> = w.lidar_weights.iter().map(|v| format!("{v}")).collect();
    let _ = writeln!(s, "lidar_weights = {}", lw.join(" "));
    let _ = writeln!(s, "lidar_bias = {}", w.lidar_bias);
    let _ = writeln!(s, "camera_scale = {}", w.camera_scale);
    let _ = writeln!(s, "camera_bias = {}", w.camera_bias);
    let _ = writeln!(s, "tau_lidar = {}", w.tau_lidar);
    let _ = writeln!(s, "tau_camera = {}", w.tau_camera);
    let _ = writeln!(s, "template = {} {}", w.template_width, w.template_height);
    for row in w.template.chunks(w.template_width) {
        let vals: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "{}", vals.join(" "));
    }
    s
}

fn numbers(ln: usize, text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number `{t}`"))))
        .collect()
}

pub fn parse_weights(text: &str) -> Result<SurrogateWeights> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, "msfadv-surrogate 1")) => {}
        Some((ln, _)) => return Err(Error::parse(ln, "expected header `msfadv-surrogate 1`")),
        None => return Err(Error::parse(0, "empty weights file")),
    }
    let mut lw = None;
    let mut scalars: [Option<f64>; 5] = [None; 5];
    let keys = ["lidar_bias", "camera_scale", "camera_bias", "tau_lidar", "tau_camera"];
    let mut template = None;
    while let Some((ln, line)) = lines.next() {
        let (key, val) = line.split_once('=').ok_or_else(|| Error::parse(ln, "expected `key = value`"))?;
        let key = key.trim();
        let vals = numbers(ln, val)?;
        match key {
            "lidar_weights" => {
                lw = Some(<[f64; 4]>::try_from(vals).map_err(|_| Error::parse(ln, "lidar_weights needs 4 values"))?);
            }
            "template" => {
                let [w, h] = <[f64; 2]>::try_from(vals).map_err(|_| Error::parse(ln, "template needs `width height`"))?;
                if w < 1.0 || h < 1.0 || w.fract() != 0.0 || h.fract() != 0.0 || w * h > 1e6 {
                    return Err(Error::parse(ln, "bad template size"));
                }
                let (w, h) = (w as usize, h as usize);
                let mut data = Vec::with_capacity(w * h);
                for _ in 0..h {
                    let (ln, row) = lines.next().ok_or_else(|| Error::parse(ln, "truncated template"))?;
                    let r = numbers(ln, row)?;
                    if r.len() != w {
                        return Err(Error::parse(ln, format!("template row needs {w} values")));
                    }
                    data.extend(r);
                }
                template = Some((w, h, data));
            }
            k => {
                let slot = keys.iter().position(|&x| x == k).ok_or_else(|| Error::parse(ln, format!("unknown key `{k}`")))?;
                let [v] = <[f64; 1]>::try_from(vals).map_err(|_| Error::parse(ln, format!("`{k}` needs one value")))?;
                scalars[slot] = Some(v);
            }
        }
    }
    let missing = |k: &str| Error::parse(0, format!("missing `{k}`"));
    let (template_width, template_height, template) = template.ok_or_else(|| missing("template"))?;
    let get = |i: usize| scalars[i].ok_or_else(|| missing(keys[i]));
    let w = SurrogateWeights {
        lidar_weights: lw.ok_or_else(|| missing("lidar_weights"))?,
        lidar_bias: get(0)?,
        camera_scale: get(1)?,
        camera_bias: get(2)?,
        tau_lidar: get(3)?,
        tau_camera: get(4)?,
        template_width,
        template_height,
        template,
    };
    w.validate().map_err(|e| Error::parse(0, e.to_string()))?;
    Ok(w)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<SurrogateWeights> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_weights(&text)
}

pub fn save_weights(w: &SurrogateWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_weights(w)).map_err(|e| Error::io(path, e))
}
