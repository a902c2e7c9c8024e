//! On-disk dataset contract: manifest, depth blobs, detections and the
//! category table.
//!
//! A dataset directory holds `manifest.json`, a category table and one raw
//! depth blob per frame (uint16 little-endian, row-major). Paths inside the
//! manifest are relative to the manifest's directory.

use crate::bbox::BBox;
use crate::camera::{CameraIntrinsics, Pose};
use crate::category::{l2_norm, load_category_table, CategoryError, CategoryTable, SizePolicy};
use crate::mask::Mask;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_DEPTH_M: f64 = 20.0;
pub const EMBEDDING_NORM_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_DEPTH_SCALE: f64 = 0.001;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed manifest: {0}")]
    Schema(String),
    #[error("missing field {0:?}")]
    MissingField(String),
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersionUnsupported(u64),
    #[error("embedding dimension mismatch: manifest declares {expected}, found {found}")]
    EmbeddingDimMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Category(CategoryError),
    #[error("frame index {index} out of range (frame_count {count})")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("corrupt blob {path}: {reason}")]
    CorruptBlob { path: String, reason: String },
    #[error("frame {frame}: invalid {what}: {reason}")]
    InvalidFrame { frame: u32, what: &'static str, reason: String },
    #[error("frame {frame}, detection {detection}: {reason}")]
    InvariantViolation { frame: u32, detection: usize, reason: String },
    #[error("duplicate frame index {0}")]
    DuplicateFrameIndex(u32),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

// ---------------------------------------------------------------------------
// Manifest schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub frame_count: usize,
    pub embedding_dim: usize,
    pub depth: DepthSpec,
    pub category_table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_policy: Option<SizePolicy>,
    /// Per-dataset defaults for the fusion and NMS configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigDefaults>,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nms: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSpec {
    pub scale: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rgb_path: Option<String>,
    pub depth_path: String,
    pub pose: Vec<f64>,
    pub intrinsics: CameraIntrinsics,
    pub blurry: bool,
    pub detections: Vec<DetectionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub label: String,
    pub from_caption: bool,
    pub embedding: EmbeddingRef,
    pub mask: RleEntry,
}

/// Embedding storage: inline base64 of float32 LE, or a byte offset into a
/// float32 LE file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmbeddingRef {
    Inline { inline: String },
    File { path: String, offset: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RleEntry {
    pub counts: Vec<u32>,
}

pub fn encode_embedding_inline(v: &[f32]) -> EmbeddingRef {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    EmbeddingRef::Inline { inline: BASE64.encode(bytes) }
}

// ---------------------------------------------------------------------------
// Decoded records

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    /// Meters per raw unit.
    pub scale: f64,
    pub raw: Vec<u16>,
}

impl DepthImage {
    /// Depth in meters, `None` for the invalid value 0.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        match self.raw[v * self.width as usize + u] {
            0 => None,
            d => Some(d as f64 * self.scale),
        }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.raw.iter().flat_map(|d| d.to_le_bytes()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
    pub label: String,
    pub embedding: Vec<f32>,
    pub mask: Mask,
    pub from_caption: bool,
}

impl Detection {
    pub fn validate(&self, width: u32, height: u32, dim: usize) -> Result<(), String> {
        if !self.bbox.is_valid() {
            return Err(format!("degenerate bbox {:?}", <[f64; 4]>::from(self.bbox)));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        if self.embedding.len() != dim {
            return Err(format!("embedding dimension {} != {dim}", self.embedding.len()));
        }
        let norm = l2_norm(&self.embedding);
        if !((norm - 1.0).abs() <= EMBEDDING_NORM_TOLERANCE) {
            return Err(format!("embedding is not unit norm (|e| = {norm})"));
        }
        if self.mask.width() != width || self.mask.height() != height {
            return Err(format!(
                "mask is {}x{}, frame is {width}x{height}",
                self.mask.width(),
                self.mask.height()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub index: u32,
    pub rgb_path: Option<String>,
    pub depth_path: String,
    pub depth: DepthImage,
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
    pub detections: Vec<Detection>,
    pub blurry: bool,
}

/// Keeps the frames not flagged as blurry, in order.
pub fn filter_blurry(frames: impl IntoIterator<Item = FrameRecord>) -> Vec<FrameRecord> {
    frames.into_iter().filter(|f| !f.blurry).collect()
}

// ---------------------------------------------------------------------------
// Loading

/// Read-only handle over a dataset directory. Frames are decoded lazily.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    manifest: Manifest,
    categories: CategoryTable,
}

const REQUIRED_TOP_LEVEL: [&str; 6] =
    ["schema_version", "frame_count", "embedding_dim", "depth", "category_table", "frames"];

pub fn load_manifest(path: &Path) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| DatasetError::Schema(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| DatasetError::Schema("manifest must be a JSON object".into()))?;
    for key in REQUIRED_TOP_LEVEL {
        if !obj.contains_key(key) {
            return Err(DatasetError::MissingField(key.into()));
        }
    }
    let version = obj["schema_version"]
        .as_u64()
        .ok_or_else(|| DatasetError::Schema("schema_version must be an integer".into()))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(DatasetError::SchemaVersionUnsupported(version));
    }
    let depth = obj["depth"]
        .as_object()
        .ok_or_else(|| DatasetError::Schema("depth must be an object".into()))?;
    for (key, name) in [("scale", "depth_scale"), ("width", "depth.width"), ("height", "depth.height")] {
        if !depth.contains_key(key) {
            return Err(DatasetError::MissingField(name.into()));
        }
    }
    let manifest: Manifest =
        serde_json::from_value(value).map_err(|e| DatasetError::Schema(e.to_string()))?;
    if manifest.frame_count != manifest.frames.len() {
        return Err(DatasetError::Schema(format!(
            "frame_count {} but {} frame entries",
            manifest.frame_count,
            manifest.frames.len()
        )));
    }
    if !(manifest.depth.scale > 0.0 && manifest.depth.scale.is_finite()) {
        return Err(DatasetError::Schema(format!("depth scale {} must be positive", manifest.depth.scale)));
    }
    let mut seen = BTreeSet::new();
    for f in &manifest.frames {
        if !seen.insert(f.index) {
            return Err(DatasetError::DuplicateFrameIndex(f.index));
        }
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let table_path = root.join(&manifest.category_table);
    let policy = manifest.size_policy.unwrap_or_default();
    let categories = load_category_table(&table_path, Some(manifest.embedding_dim), policy).map_err(|e| match e {
        CategoryError::EmbeddingDimMismatch { expected, found, .. } => {
            DatasetError::EmbeddingDimMismatch { expected, found }
        }
        other => DatasetError::Category(other),
    })?;
    Ok(Dataset { root, manifest, categories })
}

impl Dataset {
    pub fn frame_count(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.manifest.embedding_dim
    }

    pub fn categories(&self) -> &CategoryTable {
        &self.categories
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Blur flag straight from the manifest, without decoding the frame.
    pub fn is_blurry(&self, index: usize) -> Option<bool> {
        self.manifest.frames.get(index).map(|f| f.blurry)
    }

    pub fn load_frame(&self, index: usize) -> Result<FrameRecord, DatasetError> {
        let count = self.frame_count();
        let entry = self
            .manifest
            .frames
            .get(index)
            .ok_or(DatasetError::IndexOutOfRange { index, count })?;
        let spec = self.manifest.depth;
        let frame = entry.index;

        entry
            .intrinsics
            .validate()
            .map_err(|reason| DatasetError::InvalidFrame { frame, what: "intrinsics", reason })?;
        if entry.intrinsics.width != spec.width || entry.intrinsics.height != spec.height {
            return Err(DatasetError::InvalidFrame {
                frame,
                what: "intrinsics",
                reason: format!(
                    "image {}x{} differs from depth {}x{}",
                    entry.intrinsics.width, entry.intrinsics.height, spec.width, spec.height
                ),
            });
        }
        let pose = Pose::from_row_major(&entry.pose)
            .map_err(|reason| DatasetError::InvalidFrame { frame, what: "pose", reason })?;

        let depth = self.read_depth(&entry.depth_path, spec)?;
        if let Some(bad) = depth.raw.iter().find(|&&d| d as f64 * spec.scale > MAX_DEPTH_M) {
            return Err(DatasetError::InvalidFrame {
                frame,
                what: "depth",
                reason: format!("{} m exceeds {MAX_DEPTH_M} m", *bad as f64 * spec.scale),
            });
        }

        let dim = self.manifest.embedding_dim;
        let mut detections = Vec::with_capacity(entry.detections.len());
        for (i, d) in entry.detections.iter().enumerate() {
            let violation = |reason: String| DatasetError::InvariantViolation { frame, detection: i, reason };
            let embedding = self.read_embedding(&d.embedding, dim)?;
            let mask = Mask::from_rle(spec.width, spec.height, &d.mask.counts).map_err(|e| violation(e.to_string()))?;
            let det = Detection {
                bbox: BBox::from(d.bbox),
                confidence: d.confidence,
                label: d.label.clone(),
                embedding,
                mask,
                from_caption: d.from_caption,
            };
            det.validate(spec.width, spec.height, dim).map_err(violation)?;
            detections.push(det);
        }

        Ok(FrameRecord {
            index: entry.index,
            rgb_path: entry.rgb_path.clone(),
            depth_path: entry.depth_path.clone(),
            depth,
            intrinsics: entry.intrinsics,
            pose,
            detections,
            blurry: entry.blurry,
        })
    }

    fn read_depth(&self, rel: &str, spec: DepthSpec) -> Result<DepthImage, DatasetError> {
        let path = self.root.join(rel);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        let expected = spec.width as usize * spec.height as usize * 2;
        if bytes.len() != expected {
            return Err(DatasetError::CorruptBlob {
                path: rel.into(),
                reason: format!("{} bytes, expected {expected}", bytes.len()),
            });
        }
        let raw = bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        Ok(DepthImage { width: spec.width, height: spec.height, scale: spec.scale, raw })
    }

    fn read_embedding(&self, r: &EmbeddingRef, dim: usize) -> Result<Vec<f32>, DatasetError> {
        let n = dim * 4;
        let (bytes, origin) = match r {
            EmbeddingRef::Inline { inline } => {
                let bytes = BASE64.decode(inline).map_err(|e| DatasetError::CorruptBlob {
                    path: "<inline embedding>".into(),
                    reason: e.to_string(),
                })?;
                (bytes, "<inline embedding>".to_string())
            }
            EmbeddingRef::File { path, offset } => {
                let full = self.root.join(path);
                let mut f = std::fs::File::open(&full).map_err(io_err(&full))?;
                f.seek(SeekFrom::Start(*offset)).map_err(io_err(&full))?;
                let mut buf = Vec::with_capacity(n);
                f.take(n as u64).read_to_end(&mut buf).map_err(io_err(&full))?;
                (buf, path.clone())
            }
        };
        if bytes.len() != n {
            return Err(DatasetError::CorruptBlob {
                path: origin,
                reason: format!("embedding has {} bytes, expected {n}", bytes.len()),
            });
        }
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }
}

// ---------------------------------------------------------------------------
// Writing

/// Writes the frame's depth blob under `root` and returns its manifest entry
/// (embeddings inline).
pub fn write_frame(root: &Path, frame: &FrameRecord) -> Result<FrameEntry, DatasetError> {
    let path = root.join(&frame.depth_path);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(&path, frame.depth.to_le_bytes()).map_err(io_err(&path))?;
    Ok(FrameEntry {
        index: frame.index,
        rgb_path: frame.rgb_path.clone(),
        depth_path: frame.depth_path.clone(),
        pose: frame.pose.to_row_major().to_vec(),
        intrinsics: frame.intrinsics,
        blurry: frame.blurry,
        detections: frame
            .detections
            .iter()
            .map(|d| DetectionEntry {
                bbox: d.bbox.into(),
                confidence: d.confidence,
                label: d.label.clone(),
                from_caption: d.from_caption,
                embedding: encode_embedding_inline(&d.embedding),
                mask: RleEntry { counts: d.mask.to_rle() },
            })
            .collect(),
    })
}

/// Writes `manifest.json` into `root` and returns its path.
pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<PathBuf, DatasetError> {
    std::fs::create_dir_all(root).map_err(io_err(root))?;
    let path = root.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| DatasetError::Schema(e.to_string()))?;
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn write_category_table(path: &Path, table: &CategoryTable) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, table.to_json()).map_err(io_err(path))
}
