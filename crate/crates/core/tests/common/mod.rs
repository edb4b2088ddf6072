//! Reference geometry built from rotation matrices, kept apart from the
//! closed forms used by the library.

#![allow(dead_code)]

pub type Mat3 = [[f64; 3]; 3];

pub fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn apply(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

pub fn transpose(m: &Mat3) -> Mat3 {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[j][i]))
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

/// Columns are the world directions of the camera X (right), Y (down) and
/// Z (optical) axes: a level camera looking along +x, pitched down about the
/// world y axis, then yawed about z.
pub fn camera_to_world_rotation(yaw: f64, pitch: f64) -> Mat3 {
    let level: Mat3 = [[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
    mul(&rot_z(yaw), &mul(&rot_y(pitch), &level))
}

pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub position: [f64; 3],
    pub rotation: Mat3,
}

impl Camera {
    pub fn new(
        intr: &borderforge::camera::CameraIntrinsics,
        position: [f64; 3],
        yaw: f64,
        pitch: f64,
    ) -> Self {
        Self {
            fx: intr.fx,
            fy: intr.fy,
            cx: intr.cx,
            cy: intr.cy,
            position,
            rotation: camera_to_world_rotation(yaw, pitch),
        }
    }

    pub fn project(&self, w: [f64; 3]) -> Option<(f64, f64)> {
        let d = [0, 1, 2].map(|i| w[i] - self.position[i]);
        let c = apply(&transpose(&self.rotation), d);
        (c[2] > 0.0).then(|| {
            (
                self.fx * c[0] / c[2] + self.cx,
                self.fy * c[1] / c[2] + self.cy,
            )
        })
    }

    /// Optical-axis depth of the floor point seen through pixel `(u, v)`.
    pub fn floor_depth(&self, u: f64, v: f64) -> Option<f64> {
        let ray_cam = [(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0];
        let ray = apply(&self.rotation, ray_cam);
        if ray[2] >= 0.0 {
            return None;
        }
        // With the camera-frame ray normalized to z = 1 the ray parameter is Z.
        Some(-self.position[2] / ray[2])
    }
}
