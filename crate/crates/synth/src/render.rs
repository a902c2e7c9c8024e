//! Analytic depth rendering and detection synthesis.

use crate::scene::SynthScene;
use crate::SynthError;
use nalgebra::Vector3;
use promptmap::bbox::BBox;
use promptmap::camera::{CameraIntrinsics, Pose};
use promptmap::dataset::{DepthImage, Detection, FrameRecord, DEFAULT_DEPTH_SCALE, MAX_DEPTH_M};
use promptmap::mask::Mask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Detection and sensor corruption applied on top of the exact render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    /// Std-dev of the Gaussian jitter on each bbox coordinate, pixels.
    pub bbox_jitter_px: f64,
    /// Probability of adding a near-duplicate of a detection.
    pub duplicate_rate: f64,
    /// Max per-coordinate corner offset of a duplicate, pixels.
    pub duplicate_offset_px: f64,
    /// Probability of adding a same-label box nested inside a detection.
    pub contained_rate: f64,
    /// Probability that a frame is flagged blurry.
    pub blur_rate: f64,
    /// Std-dev of the Gaussian depth noise, meters.
    pub depth_sigma: f64,
    /// Extra depth noise on blurry frames, meters.
    pub blur_depth_sigma: f64,
    /// Instances covering fewer pixels are not detected.
    pub min_pixels: usize,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self::clean()
    }
}

impl NoiseProfile {
    pub fn clean() -> Self {
        Self {
            bbox_jitter_px: 0.0,
            duplicate_rate: 0.0,
            duplicate_offset_px: 1.0,
            contained_rate: 0.0,
            blur_rate: 0.0,
            depth_sigma: 0.0,
            blur_depth_sigma: 0.0,
            min_pixels: 16,
        }
    }

    pub fn noisy() -> Self {
        Self {
            bbox_jitter_px: 0.5,
            duplicate_rate: 0.3,
            contained_rate: 0.2,
            blur_rate: 0.1,
            depth_sigma: 0.002,
            blur_depth_sigma: 0.05,
            ..Self::clean()
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "clean" => Some(Self::clean()),
            "noisy" => Some(Self::noisy()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let rates = [
            ("duplicate_rate", self.duplicate_rate),
            ("contained_rate", self.contained_rate),
            ("blur_rate", self.blur_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(SynthError::SpecInvalid(format!("{name} = {r} outside [0, 1]")));
            }
        }
        let scales = [
            ("bbox_jitter_px", self.bbox_jitter_px),
            ("duplicate_offset_px", self.duplicate_offset_px),
            ("depth_sigma", self.depth_sigma),
            ("blur_depth_sigma", self.blur_depth_sigma),
        ];
        for (name, s) in scales {
            if !(s.is_finite() && s >= 0.0) {
                return Err(SynthError::SpecInvalid(format!("{name} = {s} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Exact per-pixel render: camera-frame depth and the hit primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<Option<f64>>,
    pub primitive: Vec<Option<usize>>,
}

pub fn render_view(scene: &SynthScene, k: &CameraIntrinsics, pose: &Pose) -> View {
    let n = k.pixel_count();
    let mut depth = Vec::with_capacity(n);
    let mut primitive = Vec::with_capacity(n);
    let origin = *pose.translation();
    for v in 0..k.height as usize {
        for u in 0..k.width as usize {
            let (x, y) = k.ray_xy(u, v);
            // z = 1 in the camera frame, so the ray parameter is the depth.
            let dir = pose.rotation() * Vector3::new(x, y, 1.0);
            match scene.cast(&origin, &dir) {
                Some((t, i)) if t <= MAX_DEPTH_M => {
                    depth.push(Some(t));
                    primitive.push(Some(i));
                }
                _ => {
                    depth.push(None);
                    primitive.push(None);
                }
            }
        }
    }
    View { width: k.width, height: k.height, depth, primitive }
}

/// Ground-truth panoptic segment of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtSegment {
    pub instance: u32,
    pub category: u32,
    pub mask: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub record: FrameRecord,
    pub segments: Vec<GtSegment>,
}

/// Per-frame RNG derived from the scene seed and the frame index.
pub fn frame_rng(seed: u64, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

impl View {
    /// Instance segments in ascending instance id.
    pub fn segments(&self, scene: &SynthScene) -> Vec<GtSegment> {
        let mut bits: BTreeMap<u32, (u32, Vec<bool>)> = BTreeMap::new();
        let n = self.primitive.len();
        for (px, p) in self.primitive.iter().enumerate() {
            if let Some(i) = p {
                let prim = &scene.primitives[*i];
                bits.entry(prim.instance).or_insert_with(|| (prim.category, vec![false; n])).1[px] = true;
            }
        }
        bits.into_iter()
            .map(|(instance, (category, b))| GtSegment {
                instance,
                category,
                mask: Mask::from_bits(self.width, self.height, b).expect("frame-sized"),
            })
            .collect()
    }
}

fn clamp_box(b: BBox, w: u32, h: u32) -> BBox {
    BBox::new(
        b.x_min.clamp(0.0, w as f64),
        b.y_min.clamp(0.0, h as f64),
        b.x_max.clamp(0.0, w as f64),
        b.y_max.clamp(0.0, h as f64),
    )
}

/// Renders one frame and synthesises its detections from the instance masks.
pub fn render_frame(
    scene: &SynthScene,
    index: u32,
    k: &CameraIntrinsics,
    pose: &Pose,
    noise: &NoiseProfile,
) -> SynthFrame {
    let mut rng = frame_rng(scene.seed, index);
    let blurry = rng.random::<f64>() < noise.blur_rate;
    let view = render_view(scene, k, pose);
    let segments = view.segments(scene);

    let sigma = if blurry { noise.depth_sigma.hypot(noise.blur_depth_sigma) } else { noise.depth_sigma };
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let raw = view
        .depth
        .iter()
        .map(|d| match d {
            Some(z) => {
                let z = if sigma > 0.0 { z + normal.sample(&mut rng) } else { *z };
                let q = (z / DEFAULT_DEPTH_SCALE).round();
                if q >= 1.0 && q <= u16::MAX as f64 {
                    q as u16
                } else {
                    0
                }
            }
            None => 0,
        })
        .collect();
    let depth = DepthImage { width: k.width, height: k.height, scale: DEFAULT_DEPTH_SCALE, raw };

    let mut detections = Vec::new();
    let jitter = Normal::new(0.0, noise.bbox_jitter_px).expect("finite jitter");
    for seg in &segments {
        if seg.mask.count() < noise.min_pixels.max(1) {
            continue;
        }
        let info = scene.instance(seg.instance).expect("segment instance exists");
        let label = info.labels[index as usize % info.labels.len()].clone();
        let embedding = scene.space.embed_label(&label, info.category as usize);
        let exact = seg.mask.bbox().expect("nonempty mask");
        let bbox = if noise.bbox_jitter_px > 0.0 {
            let mut j = || jitter.sample(&mut rng);
            let b = BBox::new(exact.x_min + j(), exact.y_min + j(), exact.x_max + j(), exact.y_max + j());
            let b = clamp_box(b, k.width, k.height);
            if b.is_valid() {
                b
            } else {
                exact
            }
        } else {
            exact
        };
        let confidence = rng.random_range(0.6..0.95);
        let from_caption = rng.random::<bool>();
        let det = Detection { bbox, confidence, label: label.clone(), embedding, mask: seg.mask.clone(), from_caption };

        if rng.random::<f64>() < noise.duplicate_rate {
            // Same object under the next prompt in the schedule.
            let alt = info.labels[(index as usize + 1) % info.labels.len()].clone();
            let off = noise.duplicate_offset_px;
            let mut o = || if off > 0.0 { rng.random_range(-off..=off) } else { 0.0 };
            let b = BBox::new(bbox.x_min + o(), bbox.y_min + o(), bbox.x_max + o(), bbox.y_max + o());
            detections.push(Detection {
                bbox: b,
                confidence: confidence - 0.05,
                embedding: scene.space.embed_label(&alt, info.category as usize),
                label: alt,
                ..det.clone()
            });
        }
        if rng.random::<f64>() < noise.contained_rate {
            let (w, h) = (bbox.x_max - bbox.x_min, bbox.y_max - bbox.y_min);
            let inner = BBox::new(bbox.x_min + 0.25 * w, bbox.y_min + 0.25 * h, bbox.x_max - 0.25 * w, bbox.y_max - 0.25 * h);
            let mask = seg.mask.crop_to(&inner);
            if inner.is_valid() && !mask.is_empty() {
                detections.push(Detection { bbox: inner, confidence: confidence - 0.1, mask, ..det.clone() });
            }
        }
        detections.push(det);
    }

    let record = FrameRecord {
        index,
        rgb_path: None,
        depth_path: format!("depth/{index:06}.bin"),
        depth,
        intrinsics: *k,
        pose: *pose,
        detections,
        blurry,
    };
    SynthFrame { record, segments }
}
