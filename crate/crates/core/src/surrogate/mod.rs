//! Differentiable stand-in detectors and the rule-based fusion predicate.

mod calibrate;
mod model;

pub use calibrate::{fit_surrogates, normalize_template, CalibrationSample, CALIBRATION_MARGIN, DEFAULT_THRESHOLD};
pub use model::{
    camera_confidence, camera_logit, camera_patch, format_weights, fuse_rule, lidar_confidence, lidar_logit,
    load_weights, ncc, parse_weights, pooled_lidar_features, save_weights, CellRect, DetectionRegion, PixelRect,
    SurrogateWeights, LIDAR_FEATURES,
};
