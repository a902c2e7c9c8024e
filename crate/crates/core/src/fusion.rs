//! Unified panoptic fusion.
//!
//! Each thing instance, stuff category and (optionally) free space owns a TSDF
//! submap at the voxel size of its category's size class. Per frame, the
//! surviving detections are associated to submaps by rendered-mask IoU, new
//! submaps are spawned for unmatched detections, depth is fused under each
//! detection mask and the elementary descriptor is folded into the submap's
//! dynamic descriptor.

use crate::camera::{CameraIntrinsics, Pose};
use crate::category::{CategoryKind, CategoryTable};
use crate::dataset::{DepthImage, FrameRecord, MAX_DEPTH_M};
use crate::descriptor::DynamicDescriptor;
use crate::mask::Mask;
use crate::nms::{custom_nms, NmsCandidate, NmsConfig};
use crate::retrieval::{make_elementary_descriptor, ElementaryDescriptor, RetrievalError};
use crate::tsdf::TsdfGrid;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
    #[error("frame {frame}: invalid {what}: {reason}")]
    InvalidFrame { frame: u32, what: &'static str, reason: String },
    #[error("frame {frame}, detection {detection}: {reason}")]
    InvalidDetection { frame: u32, detection: usize, reason: String },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Minimum mask IoU for fusing into an existing submap.
    pub xi_iou: f64,
    /// Weight cap of the running TSDF average.
    pub w_max: f32,
    /// Rendering keeps pixels with `|tsdf| <= surface_band * voxel_size`.
    pub surface_band: f64,
    /// Truncation distance as a multiple of the voxel size.
    pub truncation_factor: f64,
    pub enable_freespace: bool,
    /// Only submaps whose current category equals the detection's category
    /// are association candidates.
    pub require_category_match: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            xi_iou: 0.1,
            w_max: 64.0,
            surface_band: 1.0,
            truncation_factor: 4.0,
            enable_freespace: false,
            require_category_match: true,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: String| Err(FusionError::InvalidConfig(m));
        if !(self.xi_iou > 0.0 && self.xi_iou < 1.0) {
            return bad(format!("xi_iou must be in (0, 1), got {}", self.xi_iou));
        }
        if !(self.w_max >= 1.0 && self.w_max.is_finite()) {
            return bad(format!("w_max must be >= 1, got {}", self.w_max));
        }
        if !(self.surface_band > 0.0 && self.surface_band.is_finite()) {
            return bad(format!("surface_band must be > 0, got {}", self.surface_band));
        }
        if !(self.truncation_factor > 0.0 && self.truncation_factor.is_finite()) {
            return bad(format!("truncation_factor must be > 0, got {}", self.truncation_factor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubmapKind {
    Thing,
    Stuff,
    Freespace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submap {
    pub id: u32,
    pub kind: SubmapKind,
    pub grid: TsdfGrid,
    /// `None` only for the free-space submap.
    pub descriptor: Option<DynamicDescriptor>,
    pub frames_observed: u32,
    /// Sequence number (frames processed so far) of the last integration.
    pub last_observed: Option<u64>,
}

impl Submap {
    pub fn voxel_size(&self) -> f64 {
        self.grid.voxel_size()
    }

    pub fn truncation(&self) -> f64 {
        self.grid.truncation()
    }

    pub fn category(&self) -> Option<u32> {
        self.descriptor.as_ref().map(|d| d.current_category)
    }
}

/// Outcome of matching one detection mask against the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Association {
    Existing { submap: u32, iou: f64 },
    New,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Fused { submap: u32, iou: f64 },
    /// Unmatched stuff detection merged into its category's stuff submap.
    StuffMerged { submap: u32 },
    Created { submap: u32 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameReport {
    pub detections: usize,
    pub after_nms: usize,
    /// `(detection index, outcome)` in processing order.
    pub outcomes: Vec<(usize, Outcome)>,
}

impl FrameReport {
    pub fn created(&self) -> usize {
        self.outcomes.iter().filter(|(_, o)| matches!(o, Outcome::Created { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanopticMap {
    pub(crate) submaps: BTreeMap<u32, Submap>,
    pub(crate) next_instance_id: u32,
    pub(crate) stuff_index: BTreeMap<u32, u32>,
    pub(crate) freespace_id: Option<u32>,
    pub(crate) config: FusionConfig,
    pub(crate) nms: NmsConfig,
    pub(crate) categories: CategoryTable,
    pub(crate) frames_processed: u64,
}

/// Side planes of the viewing frustum in the camera frame.
struct Frustum {
    normals: [Vector3<f64>; 4],
}

impl Frustum {
    fn new(k: &CameraIntrinsics) -> Self {
        let x0 = (-0.5 - k.cx) / k.fx;
        let x1 = (k.width as f64 - 0.5 - k.cx) / k.fx;
        let y0 = (-0.5 - k.cy) / k.fy;
        let y1 = (k.height as f64 - 0.5 - k.cy) / k.fy;
        Self {
            normals: [
                Vector3::new(1.0, 0.0, -x0).normalize(),
                Vector3::new(-1.0, 0.0, x1).normalize(),
                Vector3::new(0.0, 1.0, -y0).normalize(),
                Vector3::new(0.0, -1.0, y1).normalize(),
            ],
        }
    }

    fn intersects_sphere(&self, c: &Vector3<f64>, r: f64) -> bool {
        c.z >= -r && c.z - r <= MAX_DEPTH_M && self.normals.iter().all(|n| n.dot(c) >= -r)
    }
}

/// Whether any allocated block of `grid` intersects the camera frustum.
pub fn grid_in_frustum(grid: &TsdfGrid, intrinsics: &CameraIntrinsics, pose: &Pose) -> bool {
    let frustum = Frustum::new(intrinsics);
    grid.blocks().keys().any(|&b| {
        let (c, r) = grid.block_sphere(b);
        frustum.intersects_sphere(&pose.to_camera(&c), r)
    })
}

/// Rendered mask of a submap in the given view: the pixels whose measured
/// depth lands on the submap's surface.
pub fn render_submap_mask(
    submap: &Submap,
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
    depth: &DepthImage,
    surface_band: f64,
) -> Mask {
    submap.grid.render_surface_mask(depth, intrinsics, pose, surface_band * submap.voxel_size())
}

/// Fuses the frame's depth under `mask` into the submap.
pub fn integrate_mask(submap: &mut Submap, frame: &FrameRecord, mask: &Mask, w_max: f32) -> usize {
    submap.grid.integrate(&frame.depth, &frame.intrinsics, &frame.pose, Some(mask), w_max)
}

/// Argmax-IoU gate; ties go to the lowest submap id. `ious` must be in
/// ascending submap-id order.
pub fn select_association(ious: &[(u32, f64)], xi_iou: f64) -> Association {
    let mut best: Option<(u32, f64)> = None;
    for &(id, iou) in ious {
        if best.is_none_or(|(_, b)| iou > b) {
            best = Some((id, iou));
        }
    }
    match best {
        Some((submap, iou)) if iou >= xi_iou => Association::Existing { submap, iou },
        _ => Association::New,
    }
}

impl PanopticMap {
    pub fn new(categories: CategoryTable, config: FusionConfig, nms: NmsConfig) -> Result<Self, FusionError> {
        config.validate()?;
        nms.validate().map_err(FusionError::InvalidConfig)?;
        Ok(Self {
            submaps: BTreeMap::new(),
            next_instance_id: 1,
            stuff_index: BTreeMap::new(),
            freespace_id: None,
            config,
            nms,
            categories,
            frames_processed: 0,
        })
    }

    pub fn submaps(&self) -> &BTreeMap<u32, Submap> {
        &self.submaps
    }

    pub fn submap(&self, id: u32) -> Option<&Submap> {
        self.submaps.get(&id)
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn nms_config(&self) -> &NmsConfig {
        &self.nms
    }

    pub fn categories(&self) -> &CategoryTable {
        &self.categories
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames_processed
    }

    pub fn next_instance_id(&self) -> u32 {
        self.next_instance_id
    }

    pub fn stuff_index(&self) -> &BTreeMap<u32, u32> {
        &self.stuff_index
    }

    pub fn embedding_dim(&self) -> usize {
        self.categories.embedding_dim()
    }

    /// Submaps carrying a thing descriptor.
    pub fn thing_submaps(&self) -> impl Iterator<Item = &Submap> {
        self.submaps.values().filter(|s| s.kind == SubmapKind::Thing)
    }

    /// Submap ids that may be associated with a detection of `category` in
    /// this view.
    pub fn association_candidates(&self, category: u32, intrinsics: &CameraIntrinsics, pose: &Pose) -> Vec<u32> {
        self.submaps
            .values()
            .filter(|s| s.kind != SubmapKind::Freespace)
            .filter(|s| !self.config.require_category_match || s.category() == Some(category))
            .filter(|s| grid_in_frustum(&s.grid, intrinsics, pose))
            .map(|s| s.id)
            .collect()
    }

    /// Matches a detection mask against the rendered masks of the candidate
    /// submaps.
    pub fn associate(&self, mask: &Mask, e: &ElementaryDescriptor, frame: &FrameRecord) -> Association {
        let mut cache = BTreeMap::new();
        self.associate_cached(mask, e, frame, &mut cache)
    }

    fn associate_cached(
        &self,
        mask: &Mask,
        e: &ElementaryDescriptor,
        frame: &FrameRecord,
        cache: &mut BTreeMap<u32, Mask>,
    ) -> Association {
        let candidates = self.association_candidates(e.category_id, &frame.intrinsics, &frame.pose);
        let missing: Vec<u32> = candidates.iter().copied().filter(|id| !cache.contains_key(id)).collect();
        let rendered: Vec<(u32, Mask)> = missing
            .par_iter()
            .map(|&id| {
                let s = &self.submaps[&id];
                (id, render_submap_mask(s, &frame.intrinsics, &frame.pose, &frame.depth, self.config.surface_band))
            })
            .collect();
        cache.extend(rendered);
        let ious: Vec<(u32, f64)> = candidates
            .iter()
            .map(|&id| (id, mask.iou(&cache[&id]).expect("frame-sized masks")))
            .collect();
        select_association(&ious, self.config.xi_iou)
    }

    fn create_submap(&mut self, kind: SubmapKind, voxel_size: f64, descriptor: Option<DynamicDescriptor>) -> u32 {
        let id = self.next_instance_id;
        self.next_instance_id += 1;
        let grid = TsdfGrid::new(voxel_size, self.config.truncation_factor * voxel_size);
        self.submaps
            .insert(id, Submap { id, kind, grid, descriptor, frames_observed: 0, last_observed: None });
        id
    }

    fn mark_observed(&mut self, id: u32) {
        let seq = self.frames_processed;
        let s = self.submaps.get_mut(&id).expect("submap exists");
        if s.last_observed != Some(seq) {
            s.last_observed = Some(seq);
            s.frames_observed += 1;
        }
    }

    fn validate_frame(&self, frame: &FrameRecord) -> Result<(), FusionError> {
        let k = &frame.intrinsics;
        let invalid = |what, reason| FusionError::InvalidFrame { frame: frame.index, what, reason };
        k.validate().map_err(|r| invalid("intrinsics", r))?;
        if frame.depth.width != k.width || frame.depth.height != k.height {
            return Err(invalid("depth", "depth size differs from intrinsics".into()));
        }
        let dim = self.categories.embedding_dim();
        for (i, d) in frame.detections.iter().enumerate() {
            d.validate(k.width, k.height, dim).map_err(|reason| FusionError::InvalidDetection {
                frame: frame.index,
                detection: i,
                reason,
            })?;
        }
        Ok(())
    }

    /// Fuses one (non-blurry) frame: NMS, retrieval, association, integration
    /// and descriptor aggregation, in descending detection confidence.
    pub fn process_frame(&mut self, frame: &FrameRecord) -> Result<FrameReport, FusionError> {
        self.validate_frame(frame)?;
        let descriptors = frame
            .detections
            .iter()
            .map(|d| make_elementary_descriptor(d, &self.categories))
            .collect::<Result<Vec<_>, _>>()?;
        let candidates: Vec<NmsCandidate> = frame
            .detections
            .iter()
            .zip(&descriptors)
            .map(|(d, e)| NmsCandidate {
                bbox: d.bbox,
                confidence: d.confidence,
                from_caption: d.from_caption,
                category: e.category_id,
            })
            .collect();
        let mut order = custom_nms(&candidates, &self.nms);
        let mut report = FrameReport { detections: frame.detections.len(), after_nms: order.len(), outcomes: vec![] };
        order.sort_by(|&a, &b| {
            frame.detections[b].confidence.total_cmp(&frame.detections[a].confidence).then(a.cmp(&b))
        });

        let mut cache: BTreeMap<u32, Mask> = BTreeMap::new();
        for i in order {
            let det = &frame.detections[i];
            let e = &descriptors[i];
            if det.mask.is_empty() {
                continue;
            }
            let outcome = match self.associate_cached(&det.mask, e, frame, &mut cache) {
                Association::Existing { submap, iou } => Outcome::Fused { submap, iou },
                Association::New => {
                    let category = self.categories.get(e.category_id).expect("retrieved category exists");
                    match (category.kind, self.stuff_index.get(&e.category_id)) {
                        (CategoryKind::Stuff, Some(&submap)) => Outcome::StuffMerged { submap },
                        (kind, _) => {
                            let voxel = self.categories.size_policy().voxel_size(e.size_class);
                            let submap_kind = match kind {
                                CategoryKind::Thing => SubmapKind::Thing,
                                CategoryKind::Stuff => SubmapKind::Stuff,
                            };
                            let id = self.create_submap(submap_kind, voxel, None);
                            if kind == CategoryKind::Stuff {
                                self.stuff_index.insert(e.category_id, id);
                            }
                            Outcome::Created { submap: id }
                        }
                    }
                }
            };
            let id = match outcome {
                Outcome::Fused { submap, .. } | Outcome::StuffMerged { submap } | Outcome::Created { submap } => submap,
            };
            let w_max = self.config.w_max;
            let s = self.submaps.get_mut(&id).expect("submap exists");
            integrate_mask(s, frame, &det.mask, w_max);
            match &mut s.descriptor {
                Some(d) => d.update(e, &self.categories),
                None => s.descriptor = Some(DynamicDescriptor::from_elementary(e)),
            }
            cache.remove(&id);
            self.mark_observed(id);
            report.outcomes.push((i, outcome));
        }

        if self.config.enable_freespace {
            let id = match self.freespace_id {
                Some(id) => id,
                None => {
                    let id = self.create_submap(SubmapKind::Freespace, self.categories.size_policy().freespace, None);
                    self.freespace_id = Some(id);
                    id
                }
            };
            let w_max = self.config.w_max;
            let s = self.submaps.get_mut(&id).expect("submap exists");
            s.grid.integrate(&frame.depth, &frame.intrinsics, &frame.pose, None, w_max);
            self.mark_observed(id);
        }

        self.frames_processed += 1;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_is_inclusive_and_ties_pick_lowest_id() {
        assert_eq!(select_association(&[], 0.1), Association::New);
        assert_eq!(select_association(&[(3, 0.09)], 0.1), Association::New);
        assert_eq!(select_association(&[(3, 0.11)], 0.1), Association::Existing { submap: 3, iou: 0.11 });
        assert_eq!(select_association(&[(3, 0.1)], 0.1), Association::Existing { submap: 3, iou: 0.1 });
        assert_eq!(
            select_association(&[(1, 0.4), (2, 0.6)], 0.1),
            Association::Existing { submap: 2, iou: 0.6 }
        );
        assert_eq!(
            select_association(&[(4, 0.5), (7, 0.5)], 0.1),
            Association::Existing { submap: 4, iou: 0.5 }
        );
    }

    #[test]
    fn config_validation() {
        assert!(FusionConfig::default().validate().is_ok());
        assert!(FusionConfig { xi_iou: 1.5, ..Default::default() }.validate().is_err());
        assert!(FusionConfig { xi_iou: 0.0, ..Default::default() }.validate().is_err());
        assert!(FusionConfig { surface_band: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn frustum_culls_blocks_behind_camera() {
        let k = CameraIntrinsics { fx: 100.0, fy: 100.0, cx: 80.0, cy: 60.0, width: 160, height: 120 };
        let mut grid = TsdfGrid::new(0.05, 0.2);
        let depth = DepthImage { width: 160, height: 120, scale: 0.001, raw: vec![1000; 160 * 120] };
        grid.integrate(&depth, &k, &Pose::identity(), None, 64.0);
        assert!(grid_in_frustum(&grid, &k, &Pose::identity()));
        let turned = Pose::look_at(Vector3::zeros(), Vector3::new(0.0, 0.0, -1.0), Vector3::y()).unwrap();
        assert!(!grid_in_frustum(&grid, &k, &turned));
    }
}
