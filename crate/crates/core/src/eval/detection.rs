//! Class-agnostic detection precision / recall / F1.

use crate::bbox::BBox;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl DetectionCounts {
    /// Greedy confidence-ordered matching of one image. Each prediction
    /// competes only for its highest-IoU ground truth (lowest index on ties):
    /// it is a true positive when that overlap reaches `iou` and the ground
    /// truth is still unmatched, otherwise a false positive. A duplicate of an
    /// already-found object therefore never counts as finding its neighbour.
    pub fn add_image(&mut self, preds: &[ScoredBox], gts: &[BBox], iou: f64) {
        let mut order: Vec<usize> = (0..preds.len()).collect();
        order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence).then(a.cmp(&b)));
        let mut used = vec![false; gts.len()];
        for i in order {
            let mut best: Option<(usize, f64)> = None;
            for (gi, g) in gts.iter().enumerate() {
                let o = preds[i].bbox.iou(g);
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((gi, o));
                }
            }
            match best {
                Some((gi, o)) if o >= iou && !used[gi] => {
                    used[gi] = true;
                    self.tp += 1;
                }
                _ => self.fp += 1,
            }
        }
        self.fn_ += used.iter().filter(|&&u| !u).count();
    }

    pub fn merge(&mut self, other: &DetectionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// Precision is reported as 0 when there are no predictions; recall as 0
    /// when there is no ground truth.
    pub fn prf(&self) -> Prf {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Prf { precision, recall, f1 }
    }
}

pub fn detection_prf(preds: &[ScoredBox], gts: &[BBox], iou: f64) -> Prf {
    let mut c = DetectionCounts::default();
    c.add_image(preds, gts, iou);
    c.prf()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_match() {
        let gts = [BBox::new(0.0, 0.0, 10.0, 10.0), BBox::new(20.0, 0.0, 30.0, 10.0)];
        let preds: Vec<ScoredBox> = gts.iter().map(|&bbox| ScoredBox { bbox, confidence: 0.5 }).collect();
        assert_eq!(detection_prf(&preds, &gts, 0.5), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn no_predictions() {
        let p = detection_prf(&[], &[BBox::new(0.0, 0.0, 1.0, 1.0)], 0.5);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn duplicate_is_false_positive() {
        let g = BBox::new(0.0, 0.0, 10.0, 10.0);
        let preds = [ScoredBox { bbox: g, confidence: 0.9 }, ScoredBox { bbox: g, confidence: 0.8 }];
        let mut c = DetectionCounts::default();
        c.add_image(&preds, &[g], 0.5);
        assert_eq!(c, DetectionCounts { tp: 1, fp: 1, fn_: 0 });
        assert_eq!(c.prf().precision, 0.5);
    }

    #[test]
    fn duplicate_does_not_claim_a_neighbour() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(1.5, 0.0, 11.5, 10.0);
        let preds = [ScoredBox { bbox: a, confidence: 0.9 }, ScoredBox { bbox: a, confidence: 0.8 }];
        let mut c = DetectionCounts::default();
        c.add_image(&preds, &[a, b], 0.5);
        assert_eq!(c, DetectionCounts { tp: 1, fp: 1, fn_: 1 });
    }
}
