//! Differential-drive kinematics and the laser-following controller.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraMount;
use crate::grid::WorldPoint;
use crate::projection::{robot_frame, CameraPoint3D};

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    // In-range angles pass through untouched so normalization is idempotent bit for bit.
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// `(x, y, θ)` with θ in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> WorldPoint {
        WorldPoint::new(self.x, self.y)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("timestamp {t} does not follow {last}")]
pub struct NonMonotonicTime {
    pub t: f64,
    pub last: f64,
}

/// Time-stamped poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseHistory {
    samples: Vec<(f64, RobotPose)>,
}

impl PoseHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, pose: RobotPose) -> Result<(), NonMonotonicTime> {
        if let Some(&(last, _)) = self.samples.last() {
            if !(t > last) {
                return Err(NonMonotonicTime { t, last });
            }
        }
        self.samples.push((t, pose));
        Ok(())
    }

    pub fn samples(&self) -> &[(f64, RobotPose)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&(f64, RobotPose)> {
        self.samples.last()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn truncate(&mut self, len: usize) {
        self.samples.truncate(len);
    }
}

impl FromIterator<(f64, RobotPose)> for PoseHistory {
    /// Builds a history, silently skipping non-increasing timestamps.
    fn from_iter<I: IntoIterator<Item = (f64, RobotPose)>>(iter: I) -> Self {
        let mut h = PoseHistory::new();
        for (t, p) in iter {
            let _ = h.push(t, p);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCommand {
    pub const ZERO: VelocityCommand = VelocityCommand { v: 0.0, omega: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_max: 0.3,
            omega_max: 1.0,
        }
    }
}

impl KinematicLimits {
    pub fn clamp(&self, cmd: VelocityCommand) -> VelocityCommand {
        VelocityCommand {
            v: cmd.v.clamp(-self.v_max, self.v_max),
            omega: cmd.omega.clamp(-self.omega_max, self.omega_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Yaw gain, rad/s per rad of bearing.
    pub k_theta: f64,
    /// Speed gain, 1/s.
    pub k_v: f64,
    /// Planar distance to the spot below which the robot stops (m).
    pub d_stop: f64,
    /// Distances beyond this do not increase speed further (m).
    pub d_cap: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            k_theta: 1.5,
            k_v: 1.0,
            d_stop: 0.4,
            d_cap: 1.5,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.k_theta > 0.0 && self.k_v > 0.0 && self.d_stop > 0.0 && self.d_cap > 0.0) {
            return Err("controller gains and distances must be positive".into());
        }
        if self.d_stop >= self.d_cap {
            return Err(format!(
                "d_stop {} must be below d_cap {}",
                self.d_stop, self.d_cap
            ));
        }
        Ok(())
    }
}

/// Exact unicycle integration over `dt`.
pub fn step(pose: &RobotPose, cmd: VelocityCommand, dt: f64) -> RobotPose {
    debug_assert!(dt > 0.0);
    let VelocityCommand { v, omega } = cmd;
    let th = pose.theta;
    if omega.abs() < 1e-9 {
        RobotPose::new(pose.x + v * dt * th.cos(), pose.y + v * dt * th.sin(), th)
    } else {
        let th2 = th + omega * dt;
        let r = v / omega;
        RobotPose::new(
            pose.x + r * (th2.sin() - th.sin()),
            pose.y - r * (th2.cos() - th.cos()),
            th2,
        )
    }
}

/// Proportional visual-servoing law towards the back-projected spot.
pub fn follow_command(
    spot: &CameraPoint3D,
    mount: &CameraMount,
    params: &ControllerParams,
    limits: &KinematicLimits,
) -> VelocityCommand {
    let (forward, left) = robot_frame(spot, mount);
    let bearing = left.atan2(forward);
    let distance = forward.hypot(left);
    let omega = params.k_theta * bearing;
    let v = if distance < params.d_stop {
        0.0
    } else {
        let v = params.k_v * (distance.min(params.d_cap) - params.d_stop);
        v.min(limits.v_max) * bearing.cos().max(0.0)
    };
    limits.clamp(VelocityCommand { v, omega })
}

/// Heading error below which in-place rotation stops.
pub const ROTATE_TOLERANCE: f64 = 0.02;

pub fn rotate_command(
    target_yaw: f64,
    pose: &RobotPose,
    k_theta: f64,
    limits: &KinematicLimits,
) -> VelocityCommand {
    let err = normalize_angle(target_yaw - pose.theta);
    if err.abs() < ROTATE_TOLERANCE {
        return VelocityCommand::ZERO;
    }
    limits.clamp(VelocityCommand {
        v: 0.0,
        omega: k_theta * err,
    })
}
