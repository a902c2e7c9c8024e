//! Deterministic synthetic RGB-D scenes, detections and ground truth.
//!
//! A scene is an axis-aligned room (stuff planes) holding non-intersecting
//! boxes and spheres (things). Depth is ray cast analytically, detections are
//! synthesised from the exact instance masks, and label embeddings come from
//! an engineered embedding space so that every synonym retrieves its
//! intended category. Everything is a pure function of the scene spec and
//! the seed.

pub mod corpus;
pub mod embedding;
pub mod nms_corpus;
pub mod render;
pub mod scene;
pub mod spec;
pub mod taxonomy;
pub mod trajectory;

pub use corpus::{make_corpus, CorpusSummary, GroundTruth};
pub use embedding::SynthEmbeddingSpace;
pub use nms_corpus::{make_nms_corpus, NmsImage};
pub use render::{render_frame, NoiseProfile, SynthFrame};
pub use scene::{generate_scene, ObjectSpec, SceneSpec, Shape, SynthScene};
pub use spec::{CorpusSpec, NoiseSpec};
pub use trajectory::TrajectorySpec;

use promptmap::dataset::DatasetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    SpecInvalid(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("corrupt ground truth: {0}")]
    Corrupt(String),
}
