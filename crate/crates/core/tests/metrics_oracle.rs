use promptmap::bbox::BBox;
use promptmap::eval::{detection_prf, geometric_metrics, mean_ap, panoptic_quality, ScoredBox, Segment};
use promptmap::eval::panoptic::{GtRegion, ScoredRegion, DEFAULT_MAP_THRESHOLDS};
use promptmap::mask::Mask;
use proptest::prelude::*;

fn brute_nearest(q: &[f64; 3], cloud: &[[f64; 3]]) -> f64 {
    cloud.iter().map(|p| (0..3).map(|a| (p[a] - q[a]).powi(2)).sum::<f64>()).fold(f64::INFINITY, f64::min).sqrt()
}

fn cloud(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), n)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn geometric_metrics_match_brute_force(r in cloud(1..300), g in cloud(1..300), thr in 0.01f64..0.3) {
        let rep = geometric_metrics(&r, &g, thr).unwrap();
        let rg: Vec<f64> = r.iter().map(|p| brute_nearest(p, &g)).collect();
        let gr: Vec<f64> = g.iter().map(|p| brute_nearest(p, &r)).collect();
        let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64 * 100.0;
        let max = |d: &[f64]| d.iter().copied().fold(0.0, f64::max) * 100.0;
        prop_assert!(close(rep.accuracy_cm, mean(&rg)));
        prop_assert!(close(rep.completeness_cm, mean(&gr)));
        prop_assert!(close(rep.hausdorff_cm, max(&rg).max(max(&gr))));
        let eq4 = (rg.iter().chain(&gr).map(|d| d * d).sum::<f64>()) * 1e4;
        prop_assert!(close(rep.chamfer_eq4, eq4));
        let covered = gr.iter().filter(|&&d| d <= thr).count();
        prop_assert!((rep.completion_ratio_pct - 100.0 * covered as f64 / g.len() as f64).abs() <= 100.0 / g.len() as f64);
    }

    #[test]
    fn panoptic_quality_factorises(
        cells in prop::collection::vec((0u32..3, 0u32..3, 0u32..4), 1..12),
        shrink in prop::collection::vec(0usize..6, 12),
    ) {
        // Ground truth: disjoint 10x10 tiles of a 60x60 canvas; predictions
        // are the same tiles trimmed by a few columns, some relabelled.
        let mut gt = Vec::new();
        let mut pred = Vec::new();
        for (i, &(tx, ty, cat)) in cells.iter().enumerate() {
            let (x0, y0) = (tx as usize * 20, ty as usize * 20);
            if gt.iter().any(|s: &Segment| s.mask.get(x0, y0)) {
                continue;
            }
            gt.push(Segment { mask: Mask::from_fn(60, 60, |u, v| (x0..x0 + 10).contains(&u) && (y0..y0 + 10).contains(&v)), category: cat });
            let cut = shrink[i % shrink.len()];
            let pcat = if cut == 5 { cat + 1 } else { cat };
            pred.push(Segment { mask: Mask::from_fn(60, 60, |u, v| (x0..x0 + 10 - cut).contains(&u) && (y0..y0 + 10).contains(&v)), category: pcat });
        }
        let r = panoptic_quality(&pred, &gt).unwrap();
        prop_assert!((r.pq - r.sq * r.rq).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.pq) && (0.0..=1.0).contains(&r.sq) && (0.0..=1.0).contains(&r.rq));
        prop_assert_eq!(r.tp + r.fn_, gt.len());
        prop_assert_eq!(r.tp + r.fp, pred.len());
    }
}

#[test]
fn panoptic_worked_example() {
    let gt = [Segment { mask: Mask::from_fn(10, 10, |u, _| u < 10), category: 3 }];
    let pred = [Segment { mask: Mask::from_fn(10, 10, |u, _| u < 8), category: 3 }];
    let r = panoptic_quality(&pred, &gt).unwrap();
    assert!((r.pq - 0.8).abs() < 1e-12 && (r.sq - 0.8).abs() < 1e-12 && r.rq == 1.0);
}

#[test]
fn map_ladder_is_monotone_in_the_threshold() {
    let gts: Vec<GtRegion<BBox>> = (0..5).map(|i| GtRegion { region: BBox::new(0.0, 0.0, 10.0, 10.0), category: i % 2, image: i as usize }).collect();
    let preds: Vec<ScoredRegion<BBox>> = (0..5)
        .map(|i| ScoredRegion {
            region: BBox::new(0.0, 0.0, 3.2 + 1.5 * i as f64, 10.0),
            category: i % 2,
            confidence: 0.2 * i as f64,
            image: i as usize,
        })
        .collect();
    let m = mean_ap(&preds, &gts, &DEFAULT_MAP_THRESHOLDS);
    assert!(m["0.3"] >= m["0.4"] && m["0.4"] >= m["0.5"]);
    assert!(m["0.3"] > m["0.5"]);
}

#[test]
fn detection_counts_on_a_small_image() {
    let gts = [BBox::new(0.0, 0.0, 10.0, 10.0), BBox::new(50.0, 50.0, 60.0, 60.0)];
    let preds = [
        ScoredBox { bbox: BBox::new(1.0, 0.0, 10.0, 10.0), confidence: 0.9 },
        ScoredBox { bbox: BBox::new(100.0, 0.0, 110.0, 10.0), confidence: 0.8 },
    ];
    let p = detection_prf(&preds, &gts, 0.5);
    assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
}
