//! Differentiable LiDAR and camera synthesis.

mod calib;
mod camera;
mod image;
mod lidar;
mod pointcloud;
mod raycast;

pub use calib::{format_calibration, load_calibration, parse_calibration, project_point, save_calibration, Calibration};
pub use camera::{coverage_at, render_camera, render_camera_with, CameraRender, AMBIENT, COVERAGE_CUTOFF, DIFFUSE, NEAR_PLANE};
pub use image::{decode_ppm, encode_ppm, load_ppm, save_ppm, Image, SensorImage};
pub use lidar::{ground_scan, render_lidar, LidarRender, LidarScene, LidarSpec, Ray};
pub use pointcloud::{
    decode_point_cloud, encode_point_cloud, load_point_cloud, save_point_cloud, LidarPoint, PointCloud,
};
pub use raycast::{intersect_f64, ray_triangle_intersect, RayHit, MIN_HIT_DISTANCE};
