//! Camera trajectories (z-up world).

use nalgebra::Vector3;
use promptmap::camera::{CameraIntrinsics, Pose};
use serde::{Deserialize, Serialize};

pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 100.0, fy: 100.0, cx: 79.5, cy: 59.5, width: 160, height: 120 }
}

/// `n` poses on a horizontal circle of `radius` around `target`, at `height`,
/// all looking at `target`.
pub fn orbit(target: [f64; 3], radius: f64, height: f64, n: usize) -> Vec<Pose> {
    let t = Vector3::from(target);
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            let eye = Vector3::new(t.x + radius * a.cos(), t.y + radius * a.sin(), height);
            Pose::look_at(eye, t, Vector3::z()).expect("non-degenerate orbit")
        })
        .collect()
}

/// `n` poses panning a full turn from points on a small circle of `radius`
/// around `center` (at `center.z` height), looking outwards. The view tilt
/// oscillates smoothly three times per turn so floor and ceiling are both
/// seen.
pub fn pan(center: [f64; 3], radius: f64, n: usize) -> Vec<Pose> {
    let c = Vector3::from(center);
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            let eye = c + Vector3::new(radius * (a + 1.0).cos(), radius * (a + 1.0).sin(), 0.0);
            let tilt = -0.3 + 0.35 * (3.0 * a).sin();
            let target = eye + Vector3::new(a.cos(), a.sin(), tilt);
            Pose::look_at(eye, target, Vector3::z()).expect("non-degenerate pan")
        })
        .collect()
}

/// A room scan in two halves: a loop along the walls at 0.56 × the room
/// height looking at the centre of the floor (objects from every side, in
/// small steps), then a [`pan`] from the middle of the room at 0.45 × the height
/// (walls, floor and ceiling).
pub fn room_scan(room: [f64; 3], n: usize) -> Vec<Pose> {
    let (cx, cy) = (room[0] / 2.0, room[1] / 2.0);
    let half = n / 2;
    let mut poses = perimeter(room, 0.2, room[2] * 0.56, n - half);
    poses.extend(pan([cx, cy, room[2] * 0.45], 0.3, half));
    poses
}

/// `n` poses on an ellipse `inset` meters inside the walls, at `height`,
/// looking at the centre of the floor.
pub fn perimeter(room: [f64; 3], inset: f64, height: f64, n: usize) -> Vec<Pose> {
    let (cx, cy) = (room[0] / 2.0, room[1] / 2.0);
    let (rx, ry) = (cx - inset, cy - inset);
    let target = Vector3::new(cx, cy, 0.0);
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            let eye = Vector3::new(cx + rx * a.cos(), cy + ry * a.sin(), height);
            Pose::look_at(eye, target, Vector3::z()).expect("non-degenerate loop")
        })
        .collect()
}

/// Serializable trajectory description for corpus generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrajectorySpec {
    Orbit { target: [f64; 3], radius: f64, height: f64, frames: usize },
    RoomScan { frames: usize },
    Pan { center: [f64; 3], radius: f64, frames: usize },
    /// Explicit camera-to-world matrices, row-major.
    Poses { poses: Vec<Vec<f64>> },
}

impl TrajectorySpec {
    pub fn poses(&self, room: [f64; 3]) -> Result<Vec<Pose>, String> {
        match self {
            TrajectorySpec::Orbit { target, radius, height, frames } => Ok(orbit(*target, *radius, *height, *frames)),
            TrajectorySpec::RoomScan { frames } => Ok(room_scan(room, *frames)),
            TrajectorySpec::Pan { center, radius, frames } => Ok(pan(*center, *radius, *frames)),
            TrajectorySpec::Poses { poses } => poses.iter().map(|p| Pose::from_row_major(p)).collect(),
        }
    }
}
