//! Duplicate suppression for open-vocabulary detections.
//!
//! [`custom_nms`] removes near-duplicates by corner proximity (regardless of
//! label) and boxes nested inside a same-category box. [`per_class_nms`] is
//! the classic greedy IoU suppression within each category, kept as the
//! ablation baseline.

use crate::bbox::BBox;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmsConfig {
    /// Per-corner Chebyshev distance (pixels) under which two boxes are duplicates.
    pub tau_coord: f64,
    /// IoU threshold of the per-class baseline.
    pub baseline_iou: f64,
    /// Rank caption-derived detections ahead of equally confident ones.
    pub prefer_caption: bool,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self { tau_coord: 1.5, baseline_iou: 0.5, prefer_caption: true }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau_coord >= 0.0 && self.tau_coord.is_finite()) {
            return Err(format!("tau_coord must be >= 0, got {}", self.tau_coord));
        }
        if !(self.baseline_iou > 0.0 && self.baseline_iou <= 1.0) {
            return Err(format!("baseline_iou must be in (0, 1], got {}", self.baseline_iou));
        }
        Ok(())
    }
}

/// What suppression needs to know about a detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsCandidate {
    pub bbox: BBox,
    pub confidence: f64,
    pub from_caption: bool,
    /// Unified category the detection retrieved.
    pub category: u32,
}

/// Candidate indices in priority order: confidence desc, caption-derived
/// first (when enabled), then input order.
fn priority_order(candidates: &[NmsCandidate], prefer_caption: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        cb.confidence
            .total_cmp(&ca.confidence)
            .then_with(|| {
                if prefer_caption {
                    cb.from_caption.cmp(&ca.from_caption)
                } else {
                    Ordering::Equal
                }
            })
            .then(a.cmp(&b))
    });
    order
}

/// Returns the indices of surviving candidates in ascending (input) order.
///
/// Pass one walks candidates in priority order and drops any whose two
/// corners both lie within `tau_coord` of an already-kept box. Pass two drops
/// every pass-one survivor that is contained (closed intervals) in another
/// survivor of the same category; of two identical same-category boxes the
/// lower-priority one goes.
pub fn custom_nms(candidates: &[NmsCandidate], cfg: &NmsConfig) -> Vec<usize> {
    let order = priority_order(candidates, cfg.prefer_caption);
    let mut kept: Vec<usize> = Vec::with_capacity(candidates.len());
    for &i in &order {
        let b = &candidates[i].bbox;
        if kept.iter().all(|&k| candidates[k].bbox.corner_distance(b) > cfg.tau_coord) {
            kept.push(i);
        }
    }

    let mut survivors: Vec<usize> = kept
        .iter()
        .enumerate()
        .filter(|&(rank, &i)| {
            let c = &candidates[i];
            !kept.iter().enumerate().any(|(other_rank, &k)| {
                let o = &candidates[k];
                k != i
                    && o.category == c.category
                    && c.bbox.contained_in(&o.bbox)
                    && (!o.bbox.contained_in(&c.bbox) || other_rank < rank)
            })
        })
        .map(|(_, &i)| i)
        .collect();
    survivors.sort_unstable();
    survivors
}

/// Greedy confidence-ordered IoU suppression within each category.
pub fn per_class_nms(candidates: &[NmsCandidate], cfg: &NmsConfig) -> Vec<usize> {
    let order = priority_order(candidates, false);
    let mut kept: Vec<usize> = Vec::with_capacity(candidates.len());
    for &i in &order {
        let c = &candidates[i];
        let suppressed = kept.iter().any(|&k| {
            candidates[k].category == c.category && candidates[k].bbox.iou(&c.bbox) >= cfg.baseline_iou
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Checks the custom NMS post-conditions on a set of survivors.
pub fn custom_nms_violations(candidates: &[NmsCandidate], kept: &[usize], cfg: &NmsConfig) -> Vec<String> {
    let mut out = Vec::new();
    for (x, &i) in kept.iter().enumerate() {
        for &j in &kept[x + 1..] {
            let (a, b) = (&candidates[i], &candidates[j]);
            if a.bbox.corner_distance(&b.bbox) <= cfg.tau_coord {
                out.push(format!("{i} and {j} are near-duplicates"));
            }
            if a.category == b.category && (a.bbox.contained_in(&b.bbox) || b.bbox.contained_in(&a.bbox)) {
                out.push(format!("{i} and {j} are nested with the same category"));
            }
        }
    }
    out
}
