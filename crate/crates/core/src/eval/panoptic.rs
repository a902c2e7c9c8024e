//! Panoptic quality and mean average precision.

use crate::bbox::BBox;
use crate::mask::{Mask, MaskError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_MAP_THRESHOLDS: [f64; 3] = [0.3, 0.4, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub mask: Mask,
    pub category: u32,
}

/// Running PQ sums; add one image at a time, then [`finish`](Self::finish).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PanopticCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub iou_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanopticReport {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(default)]
    pub map_at: BTreeMap<String, f64>,
}

impl PanopticCounts {
    /// Matches same-category segments with IoU > 0.5 (greedy by IoU, which is
    /// the unique matching when segments do not overlap) and accumulates.
    pub fn add_image(&mut self, pred: &[Segment], gt: &[Segment]) -> Result<(), MaskError> {
        let mut pairs = Vec::new();
        for (gi, g) in gt.iter().enumerate() {
            for (pi, p) in pred.iter().enumerate() {
                if g.category != p.category {
                    continue;
                }
                let iou = g.mask.iou(&p.mask)?;
                if iou > 0.5 {
                    pairs.push((iou, gi, pi));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut gt_used = vec![false; gt.len()];
        let mut pred_used = vec![false; pred.len()];
        for (iou, gi, pi) in pairs {
            if gt_used[gi] || pred_used[pi] {
                continue;
            }
            gt_used[gi] = true;
            pred_used[pi] = true;
            self.tp += 1;
            self.iou_sum += iou;
        }
        self.fp += pred_used.iter().filter(|&&u| !u).count();
        self.fn_ += gt_used.iter().filter(|&&u| !u).count();
        Ok(())
    }

    pub fn finish(&self) -> PanopticReport {
        let denom = self.tp as f64 + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64;
        let (sq, rq) = if self.tp == 0 { (0.0, 0.0) } else { (self.iou_sum / self.tp as f64, self.tp as f64 / denom) };
        PanopticReport { pq: sq * rq, sq, rq, tp: self.tp, fp: self.fp, fn_: self.fn_, map_at: BTreeMap::new() }
    }
}

pub fn panoptic_quality(pred: &[Segment], gt: &[Segment]) -> Result<PanopticReport, MaskError> {
    let mut c = PanopticCounts::default();
    c.add_image(pred, gt)?;
    Ok(c.finish())
}

/// Region types that have an IoU.
pub trait Region {
    fn region_iou(&self, other: &Self) -> f64;
}

impl Region for BBox {
    fn region_iou(&self, other: &Self) -> f64 {
        self.iou(other)
    }
}

impl Region for Mask {
    fn region_iou(&self, other: &Self) -> f64 {
        self.iou(other).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRegion<R> {
    pub region: R,
    pub category: u32,
    pub confidence: f64,
    /// Predictions only match ground truth from the same image.
    pub image: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtRegion<R> {
    pub region: R,
    pub category: u32,
    pub image: usize,
}

/// All-point interpolated average precision of one category.
fn average_precision<R: Region>(preds: &[&ScoredRegion<R>], gts: &[&GtRegion<R>], threshold: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence).then(a.cmp(&b)));
    let mut used = vec![false; gts.len()];
    let mut tp = 0usize;
    let mut curve = Vec::with_capacity(preds.len());
    for (rank, &i) in order.iter().enumerate() {
        let p = preds[i];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if used[gi] || g.image != p.image {
                continue;
            }
            let iou = p.region.region_iou(&g.region);
            if iou >= threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            used[gi] = true;
            tp += 1;
        }
        curve.push((tp as f64 / gts.len() as f64, tp as f64 / (rank + 1) as f64));
    }
    // Precision envelope, then area under the step curve.
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..curve.len() {
        let (recall, _) = curve[k];
        if recall > prev_recall {
            let envelope = curve[k..].iter().map(|c| c.1).fold(0.0, f64::max);
            ap += (recall - prev_recall) * envelope;
            prev_recall = recall;
        }
    }
    ap
}

/// Mean over ground-truth categories of the per-category AP, one entry per
/// threshold (keys formatted with one decimal, e.g. `"0.5"`).
pub fn mean_ap<R: Region>(
    preds: &[ScoredRegion<R>],
    gts: &[GtRegion<R>],
    thresholds: &[f64],
) -> BTreeMap<String, f64> {
    let categories: BTreeSet<u32> = gts.iter().map(|g| g.category).collect();
    let mut out = BTreeMap::new();
    for &t in thresholds {
        let mut sum = 0.0;
        for &c in &categories {
            let p: Vec<&ScoredRegion<R>> = preds.iter().filter(|p| p.category == c).collect();
            let g: Vec<&GtRegion<R>> = gts.iter().filter(|g| g.category == c).collect();
            sum += average_precision(&p, &g, t);
        }
        let m = if categories.is_empty() { 0.0 } else { sum / categories.len() as f64 };
        out.insert(format!("{t:.1}"), m);
    }
    out
}
