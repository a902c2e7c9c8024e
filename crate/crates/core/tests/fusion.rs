mod common;

use common::*;
use promptmap::dataset::{Detection, FrameRecord};
use promptmap::extract::{extract_points, extract_submap_points, Band};
use promptmap::fusion::{render_submap_mask, Association, FusionConfig, Outcome, PanopticMap, SubmapKind};
use promptmap::mask::Mask;
use promptmap::nms::NmsConfig;
use promptmap::retrieval::make_elementary_descriptor;

fn new_map(config: FusionConfig) -> PanopticMap {
    PanopticMap::new(toy_table(), config, NmsConfig::default()).unwrap()
}

fn fuse(map: &mut PanopticMap, frames: &[FrameRecord]) {
    for f in frames {
        map.process_frame(f).unwrap();
    }
}

fn cube_scene() -> Scene {
    Scene { boxes: vec![Aabb::cube([0.0, 0.0, 0.3], 0.6, 7)], floor_id: Some(1), wall: None }
}

fn cube_frames(n: usize, arc: f64) -> Vec<FrameRecord> {
    let scene = cube_scene();
    orbit([0.0, 0.0, 0.3], 2.0, 1.2, n, arc)
        .into_iter()
        .enumerate()
        .map(|(i, pose)| {
            frame(i as u32, &scene, pose, &[spec(7, "table", basis(TABLE as usize), 0.9), spec(1, "floor", basis(FLOOR as usize), 0.8)])
        })
        .collect()
}

#[test]
fn flat_wall_is_recovered_within_half_a_voxel() {
    // Off the voxel lattice so that no voxel centre sits exactly on the plane.
    let wall_y = 2.01;
    let scene = Scene { boxes: vec![], floor_id: None, wall: Some((wall_y, 0)) };
    let frames: Vec<FrameRecord> = (0..10)
        .map(|i| {
            let x = -0.5 + 0.1 * i as f64;
            let pose = look_at([x, 0.0, 1.0], [x * 0.5, wall_y, 1.0 + 0.05 * i as f64]);
            frame(i, &scene, pose, &[spec(0, "wall", basis(WALL as usize), 0.9)])
        })
        .collect();
    let mut map = new_map(FusionConfig::default());
    fuse(&mut map, &frames);
    assert_eq!(map.submaps().len(), 1);
    let s = &map.submaps()[&1];
    assert_eq!((s.kind, s.category(), s.frames_observed), (SubmapKind::Stuff, Some(WALL), 10));
    let pts = extract_submap_points(s, Band::default());
    assert!(pts.len() > 100);
    let rms = (pts.points.iter().map(|p| (p[1] - wall_y).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    assert!(rms <= s.voxel_size() / 2.0, "rms {rms}");
}

#[test]
fn fused_cube_renders_its_silhouette_in_a_new_view() {
    let mut map = new_map(FusionConfig::default());
    fuse(&mut map, &cube_frames(12, std::f64::consts::TAU));
    let cube = map.thing_submaps().next().unwrap();
    assert_eq!(map.thing_submaps().count(), 1);
    assert_eq!(cube.category(), Some(TABLE));
    assert_eq!(cube.voxel_size(), 0.03);

    // Halfway between two training views.
    let a = std::f64::consts::TAU / 24.0;
    let pose = look_at([2.0 * a.cos(), 2.0 * a.sin(), 1.2], [0.0, 0.0, 0.3]);
    let k = intrinsics();
    let view = cube_scene().render(&k, &pose);
    let truth = view.mask_of(&k, 7);
    let rendered = render_submap_mask(cube, &k, &pose, &view.depth, 1.0);
    let (inter, _) = truth.overlap_counts(&rendered).unwrap();
    let recall = inter as f64 / truth.count() as f64;
    let precision = inter as f64 / rendered.count() as f64;
    assert!(recall >= 0.95, "recall {recall}");
    assert!(precision >= 0.95, "precision {precision}");
}

#[test]
fn occluded_object_keeps_only_its_own_surface() {
    // A small box in front of a larger one; the back box mask excludes the
    // occluded pixels, so the front box must never leak into its submap.
    let back = Aabb { min: [-0.4, 0.6, 0.0], max: [0.4, 0.9, 0.6], id: 8 };
    let front = Aabb { min: [-0.1, 0.0, 0.0], max: [0.1, 0.2, 0.3], id: 9 };
    let scene = Scene { boxes: vec![back, front], floor_id: None, wall: None };
    let frames: Vec<FrameRecord> = (0..6)
        .map(|i| {
            let x = -0.3 + 0.12 * i as f64;
            let pose = look_at([x, -1.5, 0.5], [0.0, 0.6, 0.3]);
            frame(i, &scene, pose, &[spec(8, "table", basis(TABLE as usize), 0.9), spec(9, "cup", basis(CUP as usize), 0.8)])
        })
        .collect();
    let mut map = new_map(FusionConfig::default());
    fuse(&mut map, &frames);
    assert_eq!(map.thing_submaps().count(), 2);
    for s in map.thing_submaps() {
        let (own, other) = if s.category() == Some(TABLE) { (back, front) } else { (front, back) };
        let slack = 1.5 * s.voxel_size();
        let dist = |b: &Aabb, p: &[f64; 3]| {
            (0..3).map(|a| (b.min[a] - p[a]).max(p[a] - b.max[a]).max(0.0).powi(2)).sum::<f64>().sqrt()
        };
        for p in extract_submap_points(s, Band::default()).points {
            assert!(dist(&own, &p) <= slack, "point {p:?} off its own box");
            assert!(dist(&other, &p) > 0.0, "point {p:?} inside the other box");
        }
    }
}

#[test]
fn synonyms_fuse_into_one_submap() {
    let scene = cube_scene();
    let poses = orbit([0.0, 0.0, 0.3], 2.0, 1.2, 2, 0.3);
    let frames = [
        frame(0, &scene, poses[0], &[spec(7, "couch", basis(COUCH as usize), 0.9)]),
        frame(1, &scene, poses[1], &[spec(7, "Sofas", synonym(COUCH, 0), 0.9)]),
    ];
    let mut map = new_map(FusionConfig::default());
    let r0 = map.process_frame(&frames[0]).unwrap();
    let r1 = map.process_frame(&frames[1]).unwrap();
    assert_eq!(r0.outcomes, vec![(0, Outcome::Created { submap: 1 })]);
    assert!(matches!(r1.outcomes[..], [(0, Outcome::Fused { submap: 1, .. })]));
    let d = map.submaps()[&1].descriptor.as_ref().unwrap();
    assert_eq!(d.labels.keys().collect::<Vec<_>>(), ["couch", "sofa"]);
    assert_eq!((d.current_category, d.label_total()), (COUCH, 2));
}

/// A detection mask holding `inside` rendered pixels and enough outside
/// pixels to bring the union to 1000.
fn gate_mask(rendered: &Mask, inside: usize) -> Mask {
    let n = rendered.count();
    assert!(n >= inside && n <= 1000, "rendered mask has {n} pixels");
    let mut extra = 1000 - n;
    let mut kept = 0;
    let bits = rendered
        .bits()
        .iter()
        .map(|&r| {
            if r {
                kept += 1;
                kept <= inside
            } else if extra > 0 {
                extra -= 1;
                true
            } else {
                false
            }
        })
        .collect();
    Mask::from_bits(rendered.width(), rendered.height(), bits).unwrap()
}

#[test]
fn gate_separates_just_below_and_just_above_the_threshold() {
    let scene = Scene { boxes: vec![Aabb::cube([0.0, 0.0, 0.15], 0.3, 7)], floor_id: None, wall: None };
    let poses = orbit([0.0, 0.0, 0.15], 1.6, 0.9, 2, 0.2);
    let first = frame(0, &scene, poses[0], &[spec(7, "table", basis(TABLE as usize), 0.9)]);
    let mut map = new_map(FusionConfig::default());
    map.process_frame(&first).unwrap();
    let second = frame(1, &scene, poses[1], &[]);
    let rendered = render_submap_mask(&map.submaps()[&1], &second.intrinsics, &second.pose, &second.depth, 1.0);

    for (inside, expect_new) in [(99, true), (101, false)] {
        let mask = gate_mask(&rendered, inside);
        assert_eq!(mask.iou(&rendered).unwrap(), inside as f64 / 1000.0);
        let det = Detection {
            bbox: mask.bbox().unwrap(),
            confidence: 0.9,
            label: "table".into(),
            embedding: basis(TABLE as usize),
            mask,
            from_caption: false,
        };
        let e = make_elementary_descriptor(&det, map.categories()).unwrap();
        let a = map.associate(&det.mask, &e, &second);
        assert_eq!(a == Association::New, expect_new, "inside {inside}: {a:?}");

        let mut probe = map.clone();
        let report = probe.process_frame(&FrameRecord { detections: vec![det], ..second.clone() }).unwrap();
        let created = matches!(report.outcomes[..], [(0, Outcome::Created { .. })]);
        assert_eq!(created, expect_new);
    }
}

#[test]
fn fusion_is_deterministic() {
    let frames = cube_frames(8, 4.0);
    let mut a = new_map(FusionConfig::default());
    let mut b = new_map(FusionConfig::default());
    fuse(&mut a, &frames);
    fuse(&mut b, &frames);
    assert!(a == b);
    assert_eq!(extract_points(&a, Band::default()), extract_points(&b, Band::default()));
}

#[test]
fn distance_and_weight_invariants_hold_frame_by_frame() {
    let frames = cube_frames(10, 5.0);
    let w_max = 6.0;
    let mut map = new_map(FusionConfig { w_max, ..FusionConfig::default() });
    let mut prev_weights: std::collections::BTreeMap<(u32, [i64; 3]), f32> = Default::default();
    let mut prev_ids: Vec<u32> = vec![];
    for f in &frames {
        map.process_frame(f).unwrap();
        let ids: Vec<u32> = map.submaps().keys().copied().collect();
        assert!(ids.starts_with(&prev_ids), "submaps are never removed or renumbered");
        assert!(ids.iter().all(|&id| id < map.next_instance_id()));
        prev_ids = ids;
        for s in map.submaps().values() {
            assert!(s.frames_observed as u64 <= map.frames_processed());
            let trunc = s.truncation() as f32;
            s.grid.for_each_voxel(|v, tsdf, w| {
                assert!(tsdf.abs() <= trunc && (0.0..=w_max).contains(&w));
                let old = prev_weights.insert((s.id, v), w).unwrap_or(0.0);
                assert!(w >= old, "weight dropped at {v:?}");
            });
        }
    }
    assert_eq!(map.frames_processed(), 10);
    assert_eq!(map.stuff_index().get(&FLOOR).copied(), map.submaps().values().find(|s| s.kind == SubmapKind::Stuff).map(|s| s.id));
}

#[test]
fn unmatched_stuff_merges_into_its_category_submap() {
    // Two disjoint floor patches seen in unrelated views still share one submap.
    let scene = Scene { boxes: vec![], floor_id: Some(1), wall: None };
    let frames = [
        frame(0, &scene, look_at([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]), &[spec(1, "floor", basis(FLOOR as usize), 0.9)]),
        frame(1, &scene, look_at([5.0, 0.0, 1.0], [5.0, -1.0, 0.0]), &[spec(1, "floor", basis(FLOOR as usize), 0.9)]),
    ];
    let mut map = new_map(FusionConfig::default());
    map.process_frame(&frames[0]).unwrap();
    let r = map.process_frame(&frames[1]).unwrap();
    assert_eq!(r.outcomes, vec![(0, Outcome::StuffMerged { submap: 1 })]);
    assert_eq!(map.submaps().len(), 1);
}

#[test]
fn invalid_frames_are_rejected() {
    let mut map = new_map(FusionConfig::default());
    let mut f = cube_frames(1, 0.0).remove(0);
    f.detections[0].embedding[0] = 0.5;
    assert!(map.process_frame(&f).is_err());
    assert_eq!(map.frames_processed(), 0);
    assert!(PanopticMap::new(toy_table(), FusionConfig { xi_iou: 1.5, ..Default::default() }, NmsConfig::default()).is_err());
}
