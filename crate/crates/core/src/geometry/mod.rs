//! Triangle meshes, rigid poses and printability metrics.

mod mesh;
mod pose;
mod printability;
mod qecd;
pub mod shapes;

pub use mesh::{format_obj, load_obj, parse_obj, save_obj, vertex_neighbors, TriMesh, MIN_FACE_AREA};
pub use pose::{apply_pose, wrap_angle, RigidPose};
pub use printability::{
    angle_deficit_sum, mean_gaussian_curvature, self_intersection_ratio, triangles_intersect, watertightness,
    CurvatureReport,
};
pub use qecd::{qecd_simplify, QecdOutcome};
