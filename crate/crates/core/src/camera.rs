//! Pinhole camera intrinsics and the robot-mounted camera pose.
//!
//! Camera frame: `X` right, `Y` down, `Z` along the optical axis. Image
//! coordinates are `(x, y)` = (column, row) with pixel centers on integers, so
//! the default principal point `(319.5, 239.5)` is the center of a 640×480
//! image. World frame: floor at `z = 0`, `z` up, yaw counter-clockwise.

use serde::{Deserialize, Serialize};

use crate::robot::RobotPose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(format!(
                "focal lengths must be positive: {} {}",
                self.fx, self.fy
            ));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(format!("cx {} outside (0, {})", self.cx, self.width));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(format!("cy {} outside (0, {})", self.cy, self.height));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= -0.5 && y >= -0.5 && x < self.width as f64 - 0.5 && y < self.height as f64 - 0.5
    }
}

/// How the camera sits on the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMount {
    /// Height of the optical center above the floor (m).
    pub height: f64,
    /// Downward tilt of the optical axis (rad).
    pub pitch: f64,
    /// Offset of the optical center ahead of the robot center (m).
    #[serde(default)]
    pub forward_offset: f64,
}

impl Default for CameraMount {
    fn default() -> Self {
        Self {
            height: 0.35,
            pitch: 0.45,
            forward_offset: 0.0,
        }
    }
}

impl CameraMount {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.height > 0.0) {
            return Err(format!(
                "camera height must be positive, got {}",
                self.height
            ));
        }
        if !(self.pitch > 0.0 && self.pitch <= std::f64::consts::FRAC_PI_2) {
            return Err(format!(
                "camera pitch must lie in (0, pi/2], got {}",
                self.pitch
            ));
        }
        Ok(())
    }
}

/// World pose of the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub yaw: f64,
    pub pitch: f64,
}

impl CameraPose {
    pub fn from_robot(pose: &RobotPose, mount: &CameraMount) -> Self {
        let (s, c) = pose.theta.sin_cos();
        Self {
            x: pose.x + mount.forward_offset * c,
            y: pose.y + mount.forward_offset * s,
            height: mount.height,
            yaw: pose.theta,
            pitch: mount.pitch,
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.height]
    }

    /// World directions of the camera `X`, `Y` and `Z` axes.
    pub fn axes(&self) -> [[f64; 3]; 3] {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        [
            [sy, -cy, 0.0],
            [-sp * cy, -sp * sy, -cp],
            [cy * cp, sy * cp, -sp],
        ]
    }

    /// Camera-frame coordinates of a world point.
    pub fn world_to_camera(&self, w: [f64; 3]) -> [f64; 3] {
        let d = [w[0] - self.x, w[1] - self.y, w[2] - self.height];
        let [ax, ay, az] = self.axes();
        [dot(d, ax), dot(d, ay), dot(d, az)]
    }

    /// World coordinates of a camera-frame point.
    pub fn camera_to_world(&self, p: [f64; 3]) -> [f64; 3] {
        let [ax, ay, az] = self.axes();
        let mut w = self.position();
        for i in 0..3 {
            w[i] += p[0] * ax[i] + p[1] * ay[i] + p[2] * az[i];
        }
        w
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Depth (along the optical axis) at which the ray through `(x, y)` meets the
/// floor, or `None` when the ray points at or above the horizon. With depth
/// measured along the optical axis the result depends only on the row.
pub fn ground_depth(intr: &CameraIntrinsics, pose: &CameraPose, _x: f64, y: f64) -> Option<f64> {
    let b = (y - intr.cy) / intr.fy;
    let (sp, cp) = pose.pitch.sin_cos();
    // world z of the ray direction (a, b, 1) is -(b cos p + sin p)
    let descent = b * cp + sp;
    if descent <= 1e-12 {
        return None;
    }
    Some(pose.height / descent)
}
