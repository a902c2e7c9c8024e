//! Open-vocabulary panoptic mapping over multi-resolution TSDF submaps.
//!
//! Posed RGB-D frames with precomputed open-vocabulary detections are fused
//! into a [`fusion::PanopticMap`]: one sparse TSDF submap per object or stuff
//! region, each carrying a dynamic descriptor that accumulates every label it
//! was observed with, a majority-voted unified category and a size prior.

pub mod bbox;
pub mod camera;
pub mod category;
pub mod dataset;
pub mod mask;
pub mod nms;
pub mod retrieval;
pub mod descriptor;
pub mod eval;
pub mod extract;
pub mod fusion;
pub mod persist;
pub mod query;
pub mod tsdf;
