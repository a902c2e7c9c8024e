//! Dataset directories with a ground-truth sidecar.
//!
//! Layout:
//!
//! ```text
//! manifest.json
//! categories.json
//! depth/NNNNNN.bin
//! ground_truth/points.bin            f32 LE xyz triples
//! ground_truth/point_categories.bin  u32 LE, one per point
//! ground_truth/point_instances.bin   u32 LE, one per point
//! ground_truth/masks.json            per-frame instance masks (RLE)
//! ground_truth/instances.json        instance table
//! ```
//!
//! The ground-truth cloud holds the surface samples observed along the
//! trajectory: seen unoccluded by a frame in which their instance was
//! detected.

use crate::render::{render_frame, NoiseProfile, SynthFrame};
use crate::scene::{InstanceInfo, SynthScene};
use crate::SynthError;
use nalgebra::Vector3;
use promptmap::camera::{CameraIntrinsics, Pose};
use promptmap::dataset::{write_category_table, write_frame, write_manifest, DepthSpec, Manifest, DEFAULT_DEPTH_SCALE, MAX_DEPTH_M, SCHEMA_VERSION};
use promptmap::mask::Mask;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const GROUND_TRUTH_DIR: &str = "ground_truth";
pub const CATEGORY_TABLE_FILE: &str = "categories.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtSegmentEntry {
    pub instance: u32,
    pub category: u32,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtFrameMasks {
    pub index: u32,
    pub segments: Vec<GtSegmentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtMasks {
    pub width: u32,
    pub height: u32,
    pub frames: Vec<GtFrameMasks>,
}

impl GtMasks {
    pub fn decode(&self, frame: &GtFrameMasks) -> Result<Vec<(u32, u32, Mask)>, SynthError> {
        frame
            .segments
            .iter()
            .map(|s| {
                Mask::from_rle(self.width, self.height, &s.counts)
                    .map(|m| (s.instance, s.category, m))
                    .map_err(|e| SynthError::Corrupt(format!("frame {} mask: {e}", frame.index)))
            })
            .collect()
    }
}

/// Ground-truth sidecar contents.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub points: Vec<[f64; 3]>,
    pub point_categories: Vec<u32>,
    pub point_instances: Vec<u32>,
    pub masks: GtMasks,
    pub instances: Vec<InstanceInfo>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.display().to_string(), source }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), SynthError> {
    std::fs::write(path, bytes).map_err(io(path))
}

fn read(path: &Path) -> Result<Vec<u8>, SynthError> {
    std::fs::read(path).map_err(io(path))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

impl GroundTruth {
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let pts: Vec<u8> = self.points.iter().flat_map(|p| p.iter().flat_map(|&c| (c as f32).to_le_bytes())).collect();
        write(&dir.join("points.bin"), &pts)?;
        let u32s = |v: &[u32]| -> Vec<u8> { v.iter().flat_map(|x| x.to_le_bytes()).collect() };
        write(&dir.join("point_categories.bin"), &u32s(&self.point_categories))?;
        write(&dir.join("point_instances.bin"), &u32s(&self.point_instances))?;
        write(&dir.join("masks.json"), to_json(&self.masks).as_bytes())?;
        write(&dir.join("instances.json"), to_json(&self.instances).as_bytes())
    }

    /// Reads a sidecar directory (the `ground_truth/` folder itself).
    pub fn load(dir: &Path) -> Result<Self, SynthError> {
        if !dir.is_dir() {
            return Err(SynthError::Io {
                path: dir.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "ground-truth sidecar not found"),
            });
        }
        let pts = read(&dir.join("points.bin"))?;
        if pts.len() % 12 != 0 {
            return Err(SynthError::Corrupt(format!("points.bin length {} is not a multiple of 12", pts.len())));
        }
        let points: Vec<[f64; 3]> = pts
            .chunks_exact(12)
            .map(|c| {
                let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]) as f64;
                [f(0), f(4), f(8)]
            })
            .collect();
        let read_u32s = |name: &str| -> Result<Vec<u32>, SynthError> {
            let b = read(&dir.join(name))?;
            if b.len() != points.len() * 4 {
                return Err(SynthError::Corrupt(format!("{name} holds {} bytes for {} points", b.len(), points.len())));
            }
            Ok(b.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
        };
        let point_categories = read_u32s("point_categories.bin")?;
        let point_instances = read_u32s("point_instances.bin")?;
        let json = |name: &str| -> Result<String, SynthError> {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(io(&p))
        };
        let masks = serde_json::from_str(&json("masks.json")?).map_err(|e| SynthError::Corrupt(e.to_string()))?;
        let instances = serde_json::from_str(&json("instances.json")?).map_err(|e| SynthError::Corrupt(e.to_string()))?;
        Ok(Self { points, point_categories, point_instances, masks, instances })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub manifest: PathBuf,
    pub frames: usize,
    pub blurry_frames: Vec<u32>,
    pub detections: usize,
    pub ground_truth_points: usize,
}

/// A surface sample is observed by a frame when it projects inside the image,
/// is the first surface hit along its camera ray, and its instance was
/// detected in that frame.
fn observed(scene: &SynthScene, p: &Vector3<f64>, primitive: usize, k: &CameraIntrinsics, frames: &[(Pose, Vec<u32>)]) -> bool {
    let instance = scene.primitives[primitive].instance;
    frames.iter().any(|(pose, detected)| {
        if !detected.contains(&instance) {
            return false;
        }
        let c = pose.to_camera(p);
        let Some((u, v)) = k.project_continuous(&c) else { return false };
        if u < -0.5 || v < -0.5 || u >= k.width as f64 - 0.5 || v >= k.height as f64 - 0.5 || c.z > MAX_DEPTH_M {
            return false;
        }
        let dir = pose.rotation() * (c / c.z);
        match scene.cast(pose.translation(), &dir) {
            Some((t, _)) => t >= c.z - 1e-6 * (1.0 + c.z),
            None => false,
        }
    })
}

/// Renders every pose (in parallel), then writes the dataset and its sidecar.
pub fn render_corpus(scene: &SynthScene, poses: &[Pose], k: &CameraIntrinsics, noise: &NoiseProfile) -> Vec<SynthFrame> {
    poses.par_iter().enumerate().map(|(i, pose)| render_frame(scene, i as u32, k, pose, noise)).collect()
}

/// Observed surface samples: `(point, category, instance)`. `frames` are the
/// rendered frames of the trajectory; an instance counts as detected in a
/// frame when its mask reaches `min_pixels`.
pub fn observed_ground_truth(scene: &SynthScene, frames: &[SynthFrame], min_pixels: usize) -> Vec<([f64; 3], u32, u32)> {
    let Some(k) = frames.first().map(|f| f.record.intrinsics) else { return vec![] };
    let views: Vec<(Pose, Vec<u32>)> = frames
        .iter()
        .map(|f| {
            let detected = f.segments.iter().filter(|s| s.mask.count() >= min_pixels.max(1)).map(|s| s.instance).collect();
            (f.record.pose, detected)
        })
        .collect();
    scene
        .sample_surfaces()
        .par_iter()
        .filter(|(p, i)| observed(scene, &Vector3::from(*p), *i, &k, &views))
        .map(|(p, i)| {
            let prim = &scene.primitives[*i];
            (*p, prim.category, prim.instance)
        })
        .collect()
}

pub fn make_corpus(
    scene: &SynthScene,
    poses: &[Pose],
    k: &CameraIntrinsics,
    noise: &NoiseProfile,
    out: &Path,
) -> Result<CorpusSummary, SynthError> {
    if poses.is_empty() {
        return Err(SynthError::SpecInvalid("trajectory is empty".into()));
    }
    noise.validate()?;
    k.validate().map_err(SynthError::SpecInvalid)?;
    let frames = render_corpus(scene, poses, k, noise);

    std::fs::create_dir_all(out).map_err(io(out))?;
    write_category_table(&out.join(CATEGORY_TABLE_FILE), &scene.categories)?;
    let mut entries = Vec::with_capacity(frames.len());
    for f in &frames {
        entries.push(write_frame(out, &f.record)?);
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        frame_count: frames.len(),
        embedding_dim: scene.categories.embedding_dim(),
        depth: DepthSpec { scale: DEFAULT_DEPTH_SCALE, width: k.width, height: k.height },
        category_table: CATEGORY_TABLE_FILE.into(),
        size_policy: Some(*scene.categories.size_policy()),
        config: None,
        frames: entries,
    };
    let manifest_path = write_manifest(out, &manifest)?;

    let gt_points = observed_ground_truth(scene, &frames, noise.min_pixels);
    let gt = GroundTruth {
        points: gt_points.iter().map(|g| g.0).collect(),
        point_categories: gt_points.iter().map(|g| g.1).collect(),
        point_instances: gt_points.iter().map(|g| g.2).collect(),
        masks: GtMasks {
            width: k.width,
            height: k.height,
            frames: frames
                .iter()
                .map(|f| GtFrameMasks {
                    index: f.record.index,
                    segments: f
                        .segments
                        .iter()
                        .map(|s| GtSegmentEntry { instance: s.instance, category: s.category, counts: s.mask.to_rle() })
                        .collect(),
                })
                .collect(),
        },
        instances: scene.instances.clone(),
    };
    gt.write(&out.join(GROUND_TRUTH_DIR))?;

    Ok(CorpusSummary {
        manifest: manifest_path,
        frames: frames.len(),
        blurry_frames: frames.iter().filter(|f| f.record.blurry).map(|f| f.record.index).collect(),
        detections: frames.iter().map(|f| f.record.detections.len()).sum(),
        ground_truth_points: gt.points.len(),
    })
}
