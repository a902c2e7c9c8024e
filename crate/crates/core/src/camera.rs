//! Pinhole intrinsics and rigid camera poses.
//!
//! Pixel `(u, v)` with integer coordinates is the pixel centre; a camera-frame
//! point projects to `(fx * x / z + cx, fy * y / z + cy)` and is assigned to the
//! nearest integer pixel. Camera frame follows the usual vision convention:
//! x right, y down, z forward.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return Err("image dimensions must be nonzero".into());
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(format!("cx={} outside [0, {})", self.cx, self.width));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(format!("cy={} outside [0, {})", self.cy, self.height));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera-frame point for pixel `(u, v)` observed at depth `z`.
    pub fn backproject(&self, u: usize, v: usize, z: f64) -> Vector3<f64> {
        let (x, y) = self.ray_xy(u, v);
        Vector3::new(x * z, y * z, z)
    }

    /// Normalised ray direction (z = 1) through pixel `(u, v)`.
    pub fn ray_xy(&self, u: usize, v: usize) -> (f64, f64) {
        ((u as f64 - self.cx) / self.fx, (v as f64 - self.cy) / self.fy)
    }

    /// Continuous image coordinates of a camera-frame point, if in front of the camera.
    pub fn project_continuous(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Nearest pixel of a camera-frame point, if it lands inside the image.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(usize, usize)> {
        let (u, v) = self.project_continuous(p)?;
        let (u, v) = (u.round(), v.round());
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }
}

/// Camera-to-world rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    /// Parses a 4x4 row-major matrix, checking orthonormality and handedness.
    pub fn from_row_major(m: &[f64]) -> Result<Self, String> {
        if m.len() != 16 {
            return Err(format!("pose must have 16 entries, found {}", m.len()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err("pose contains non-finite entries".into());
        }
        let last = [m[12], m[13], m[14], m[15]];
        if last != [0.0, 0.0, 0.0, 1.0] {
            return Err(format!("pose last row must be [0,0,0,1], found {last:?}"));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        let gram = rotation.transpose() * rotation;
        let err = (gram - Matrix3::identity()).abs().max();
        if err > 1e-6 {
            return Err(format!("rotation not orthonormal (max |RtR - I| = {err:e})"));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-6 {
            return Err(format!("rotation determinant {det} != +1"));
        }
        Ok(Self { rotation, translation })
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_row_slice(&self.to_row_major())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera frame → world frame.
    pub fn to_world(&self, p_cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p_cam + self.translation
    }

    /// World frame → camera frame.
    pub fn to_camera(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p_world - self.translation)
    }

    /// Pose of a camera at `eye` looking at `target`, with `up` as the world up hint.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Option<Self> {
        let forward = (target - eye).try_normalize(1e-12)?;
        let right = forward.cross(&up).try_normalize(1e-12)?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Some(Self { rotation, translation: eye })
    }
}
