use std::f64::consts::PI;

use crate::diff::{Scalar, V3};

use super::mesh::TriMesh;

/// Yaw about the vertical axis through `anchor`, followed by a ground-plane shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub yaw: f64,
    pub shift: [f64; 2],
    pub anchor: [f64; 3],
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

impl RigidPose {
    pub fn new(yaw: f64, shift: [f64; 2], anchor: [f64; 3]) -> Self {
        Self { yaw: wrap_angle(yaw), shift, anchor }
    }

    pub fn identity() -> Self {
        Self { yaw: 0.0, shift: [0.0, 0.0], anchor: [0.0; 3] }
    }

    /// Pose that moves a mesh whose centroid is `centroid` so that the centroid
    /// sits over ground position `(x, y)`, rotated by `yaw`.
    pub fn placing(centroid: [f64; 3], x: f64, y: f64, yaw: f64) -> Self {
        Self::new(yaw, [x - centroid[0], y - centroid[1]], centroid)
    }

    pub fn inverse(&self) -> Self {
        Self {
            yaw: wrap_angle(-self.yaw),
            shift: [-self.shift[0], -self.shift[1]],
            anchor: [self.anchor[0] + self.shift[0], self.anchor[1] + self.shift[1], self.anchor[2]],
        }
    }

    pub fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.anchor[0];
        let dy = p[1] - self.anchor[1];
        [
            self.anchor[0] + c * dx - s * dy + self.shift[0],
            self.anchor[1] + s * dx + c * dy + self.shift[1],
            p[2],
        ]
    }

    /// Differentiable form; the adjoint is the transposed rotation.
    pub fn apply_v3<S: Scalar>(&self, p: &V3<S>) -> V3<S> {
        let (s, c) = self.yaw.sin_cos();
        let dx = p.x() - self.anchor[0];
        let dy = p.y() - self.anchor[1];
        V3::new(
            S::linear(&[(dx, c), (dy, -s)]) + (self.anchor[0] + self.shift[0]),
            S::linear(&[(dx, s), (dy, c)]) + (self.anchor[1] + self.shift[1]),
            p.z(),
        )
    }
}

pub fn apply_pose(mesh: &TriMesh, pose: &RigidPose) -> TriMesh {
    let v = mesh.vertices().iter().map(|&p| pose.apply_point(p)).collect();
    mesh.with_vertices(v).expect("rigid motion keeps positions finite")
}
