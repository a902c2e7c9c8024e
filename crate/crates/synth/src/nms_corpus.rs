//! Box-level corpora for exercising duplicate suppression.

use promptmap::bbox::BBox;
use promptmap::nms::NmsCandidate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One image: raw detector output and the true object boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct NmsImage {
    pub candidates: Vec<NmsCandidate>,
    pub ground_truth: Vec<BBox>,
    /// Holds a cross-prompt near-duplicate pair plus an overlapping
    /// same-category neighbour.
    pub cross_prompt: bool,
}

const CELL: f64 = 160.0;
const COLS: usize = 4;
const ROWS: usize = 3;

/// Builds `images` images on a 640×480 canvas. Every object sits in its own
/// grid cell. Images with `cross_prompt` set contain, for their first object
/// A (category 1):
///
/// - a duplicate of A under another prompt (category 2, lower confidence),
///   every corner coordinate moved by at most `max_offset` pixels;
/// - a box nested inside A with A's category and lower confidence;
/// - a distinct true object B of A's category, shifted by 15% of A's width
///   (box IoU ≈ 0.74) and ranked below A.
pub fn make_nms_corpus(seed: u64, images: usize, cross_prompt_fraction: f64, max_offset: f64) -> Vec<NmsImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..images)
        .map(|_| {
            let cross_prompt = rng.random::<f64>() < cross_prompt_fraction;
            let n_objects = rng.random_range(2..=COLS * ROWS / 2);
            let mut cells: Vec<usize> = (0..COLS * ROWS).collect();
            // Partial Fisher-Yates for distinct cells.
            for i in 0..n_objects {
                let j = rng.random_range(i..cells.len());
                cells.swap(i, j);
            }
            let mut candidates = Vec::new();
            let mut ground_truth = Vec::new();
            for (k, &cell) in cells[..n_objects].iter().enumerate() {
                let (cx, cy) = ((cell % COLS) as f64 * CELL, (cell / COLS) as f64 * CELL);
                let w = rng.random_range(40.0..110.0);
                let h = rng.random_range(40.0..110.0);
                let x = cx + rng.random_range(5.0..(CELL - 1.15 * w - 5.0));
                let y = cy + rng.random_range(5.0..(CELL - h - 5.0));
                let a = BBox::new(x, y, x + w, y + h);
                let special = cross_prompt && k == 0;
                let category = if special { 1 } else { 10 + k as u32 };
                let confidence = if special { 0.9 } else { rng.random_range(0.5..0.95) };
                candidates.push(NmsCandidate { bbox: a, confidence, from_caption: rng.random(), category });
                ground_truth.push(a);
                if special {
                    let mut o = || rng.random_range(-max_offset..=max_offset);
                    let dup = BBox::new(a.x_min + o(), a.y_min + o(), a.x_max + o(), a.y_max + o());
                    candidates.push(NmsCandidate { bbox: dup, confidence: 0.85, from_caption: true, category: 2 });
                    let nested = BBox::new(x + 0.3 * w, y + 0.3 * h, x + 0.7 * w, y + 0.7 * h);
                    candidates.push(NmsCandidate { bbox: nested, confidence: 0.7, from_caption: false, category: 1 });
                    let b = BBox::new(x + 0.15 * w, y, x + 1.15 * w, y + h);
                    candidates.push(NmsCandidate { bbox: b, confidence: 0.8, from_caption: false, category: 1 });
                    ground_truth.push(b);
                }
            }
            NmsImage { candidates, ground_truth, cross_prompt }
        })
        .collect()
}
