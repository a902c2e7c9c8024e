//! One JSON document describing a whole corpus: scene, trajectory, noise.

use crate::corpus::{make_corpus, CorpusSummary};
use crate::render::NoiseProfile;
use crate::scene::{generate_scene, SceneSpec};
use crate::trajectory::{default_intrinsics, TrajectorySpec};
use crate::SynthError;
use promptmap::camera::CameraIntrinsics;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A noise profile given by name (`"clean"`, `"noisy"`) or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Named(String),
    Custom(NoiseProfile),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Named("clean".into())
    }
}

impl NoiseSpec {
    pub fn profile(&self) -> Result<NoiseProfile, SynthError> {
        match self {
            NoiseSpec::Named(name) => {
                NoiseProfile::named(name).ok_or_else(|| SynthError::SpecInvalid(format!("unknown noise profile {name:?}")))
            }
            NoiseSpec::Custom(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scene: SceneSpec,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Defaults to [`default_intrinsics`].
    #[serde(default)]
    pub intrinsics: Option<CameraIntrinsics>,
}

impl CorpusSpec {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::SpecInvalid(e.to_string()))
    }

    /// Validates the spec, renders the corpus and writes it to `out`.
    pub fn build(&self, out: &Path) -> Result<CorpusSummary, SynthError> {
        let scene = generate_scene(&self.scene, self.seed)?;
        let poses = self.trajectory.poses(self.scene.room).map_err(SynthError::SpecInvalid)?;
        let room = self.scene.room;
        for (i, pose) in poses.iter().enumerate() {
            let t = pose.translation();
            if (0..3).any(|a| !(t[a] > 0.0 && t[a] < room[a])) {
                return Err(SynthError::SpecInvalid(format!("camera {i} at {t:?} is outside the room")));
            }
        }
        let k = self.intrinsics.unwrap_or_else(default_intrinsics);
        make_corpus(&scene, &poses, &k, &self.noise.profile()?, out)
    }
}
