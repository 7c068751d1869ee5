//! Parse, re-serialize, parse again. Every decoder must either reject the
//! input or accept it in a form that survives its own encoder.

use msfadv::attack::{format_config, format_poses, format_scene_cfg, parse_config, parse_poses, parse_scene_cfg};
use msfadv::features::{format_feature_grid, parse_feature_grid};
use msfadv::geometry::{format_obj, parse_obj};
use msfadv::sensor::{decode_point_cloud, decode_ppm, encode_point_cloud, encode_ppm, format_calibration, parse_calibration};
use msfadv::surrogate::{format_weights, parse_weights};

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

pub fn obj(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(m) = parse_obj(t) {
        assert_eq!(parse_obj(&format_obj(&m)).expect("own output parses"), m);
    }
}

pub fn point_cloud(data: &[u8]) {
    if let Ok(pc) = decode_point_cloud(data) {
        assert_eq!(encode_point_cloud(&pc), data);
    }
}

pub fn ppm(data: &[u8]) {
    if let Ok(img) = decode_ppm(data) {
        assert_eq!(img.data.len(), img.width * img.height * 3);
        assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
        // 8-bit output is lossy for other maxvals, but stable after one pass
        let bytes = encode_ppm(&img);
        assert_eq!(encode_ppm(&decode_ppm(&bytes).expect("own output decodes")), bytes);
    }
}

pub fn calibration(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(c) = parse_calibration(t) {
        assert_eq!(parse_calibration(&format_calibration(&c)).expect("own output parses"), c);
    }
}

pub fn attack_config(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(c) = parse_config(t) {
        assert!(c.validate().is_ok());
        assert_eq!(parse_config(&format_config(&c)).expect("own output parses"), c);
    }
}

pub fn weights(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(w) = parse_weights(t) {
        assert_eq!(parse_weights(&format_weights(&w)).expect("own output parses"), w);
    }
}

pub fn feature_grid(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(f) = parse_feature_grid(t) {
        assert_eq!(parse_feature_grid(&format_feature_grid(&f)).expect("own output parses"), f);
    }
}

pub fn scene_cfg(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok((g, p)) = parse_scene_cfg(t) {
        assert_eq!(parse_scene_cfg(&format_scene_cfg(g, &p)).expect("own output parses"), (g, p));
    }
}

pub fn poses(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(v) = parse_poses(t) {
        assert_eq!(parse_poses(&format_poses(&v)).expect("own output parses"), v);
    }
}

/// Target name and check, in corpus directory order.
pub const TARGETS: [(&str, fn(&[u8])); 9] = [
    ("obj", obj),
    ("point_cloud", point_cloud),
    ("ppm", ppm),
    ("calibration", calibration),
    ("attack_config", attack_config),
    ("weights", weights),
    ("feature_grid", feature_grid),
    ("scene_cfg", scene_cfg),
    ("poses", poses),
];
