//! Geometric, panoptic and detection metrics.

pub mod detection;
pub mod geometric;
pub mod kdtree;
pub mod panoptic;

pub use detection::{detection_prf, DetectionCounts, Prf, ScoredBox};
pub use geometric::{f1_detail, geometric_metrics, GeometricReport, GeometryError};
pub use panoptic::{mean_ap, panoptic_quality, PanopticCounts, PanopticReport, Segment};
