//! Pinhole back-projection of the detected laser pixel and the camera→world
//! transform onto the floor plane.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, CameraMount, CameraPose};
use crate::grid::WorldPoint;

/// Sub-pixel image coordinate: `x` column, `y` row.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Point in the camera frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPoint3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CameraPoint3D {
    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("invalid depth {0}")]
    InvalidDepth(f64),
    #[error("point behind camera (z = {0})")]
    BehindCamera(f64),
    #[error("point is {0:.3} m off the floor plane")]
    OffFloor(f64),
}

/// Residual height tolerated when snapping a back-projected point to the floor.
pub const FLOOR_TOLERANCE: f64 = 0.01;

/// `L = π⁻¹(l, Z)`.
pub fn inverse_project(
    l: PixelCoord,
    depth: f64,
    intr: &CameraIntrinsics,
) -> Result<CameraPoint3D, ProjectionError> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(ProjectionError::InvalidDepth(depth));
    }
    Ok(CameraPoint3D {
        x: (l.x - intr.cx) / intr.fx * depth,
        y: (l.y - intr.cy) / intr.fy * depth,
        z: depth,
    })
}

pub fn forward_project(
    p: &CameraPoint3D,
    intr: &CameraIntrinsics,
) -> Result<PixelCoord, ProjectionError> {
    if !(p.z > 0.0) {
        return Err(ProjectionError::BehindCamera(p.z));
    }
    Ok(PixelCoord {
        x: intr.fx * p.x / p.z + intr.cx,
        y: intr.fy * p.y / p.z + intr.cy,
    })
}

/// Projects a floor point into the image (`None` if it is behind the camera).
pub fn project_floor_point(
    w: WorldPoint,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<PixelCoord> {
    let [x, y, z] = pose.world_to_camera([w.x, w.y, 0.0]);
    forward_project(&CameraPoint3D { x, y, z }, intr).ok()
}

/// Floor point of a camera-frame point that is known to lie on the floor.
/// The residual height is dropped; in debug builds a residual above
/// [`FLOOR_TOLERANCE`] panics.
pub fn camera_to_world(p: &CameraPoint3D, pose: &CameraPose) -> WorldPoint {
    let w = pose.camera_to_world(p.as_array());
    debug_assert!(
        w[2].abs() <= FLOOR_TOLERANCE,
        "back-projected point {w:?} is not on the floor"
    );
    WorldPoint::new(w[0], w[1])
}

/// Checked variant of [`camera_to_world`] for points that may belong to other
/// surfaces (obstacle faces).
pub fn camera_to_floor(
    p: &CameraPoint3D,
    pose: &CameraPose,
) -> Result<WorldPoint, ProjectionError> {
    let w = pose.camera_to_world(p.as_array());
    if w[2].abs() > FLOOR_TOLERANCE {
        return Err(ProjectionError::OffFloor(w[2]));
    }
    Ok(WorldPoint::new(w[0], w[1]))
}

/// Camera point expressed in the robot's planar frame: `(forward, left)`.
pub fn robot_frame(p: &CameraPoint3D, mount: &CameraMount) -> (f64, f64) {
    let (sp, cp) = mount.pitch.sin_cos();
    let forward = mount.forward_offset + p.z * cp - p.y * sp;
    let left = -p.x;
    (forward, left)
}
