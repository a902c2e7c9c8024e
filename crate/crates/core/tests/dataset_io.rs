mod common;

use common::*;
use promptmap::dataset::{filter_blurry, load_manifest, DatasetError, EmbeddingRef, FrameRecord};
use serde_json::Value;
use std::path::Path;

fn edit_manifest(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    std::fs::write(path, serde_json::to_string(&v).unwrap()).unwrap();
}

fn assert_same(a: &FrameRecord, b: &FrameRecord) {
    assert_eq!((a.index, &a.rgb_path, &a.depth_path, a.blurry), (b.index, &b.rgb_path, &b.depth_path, b.blurry));
    assert!(a.depth == b.depth, "depth differs in frame {}", a.index);
    assert_eq!(a.intrinsics, b.intrinsics);
    assert_eq!(a.pose.to_row_major(), b.pose.to_row_major());
    assert_eq!(a.detections.len(), b.detections.len());
    for (x, y) in a.detections.iter().zip(&b.detections) {
        assert_eq!((x.bbox, x.confidence, &x.label, x.from_caption), (y.bbox, y.confidence, &y.label, y.from_caption));
        assert_eq!(x.embedding, y.embedding);
        assert!(x.mask == y.mask, "mask differs in frame {}", a.index);
    }
}

fn fixture() -> (tempfile::TempDir, std::path::PathBuf, Vec<FrameRecord>) {
    let dir = tempfile::tempdir().unwrap();
    let frames = three_frames();
    let path = write_dataset(dir.path(), &toy_table(), &frames);
    (dir, path, frames)
}

#[test]
fn three_frames_round_trip_bit_exactly() {
    let (_dir, path, frames) = fixture();
    let ds = load_manifest(&path).unwrap();
    assert_eq!(ds.frame_count(), 3);
    assert_eq!(ds.embedding_dim(), DIM);
    assert_eq!(ds.categories().len(), 7);
    for (i, orig) in frames.iter().enumerate() {
        let f = ds.load_frame(i).unwrap();
        assert_same(&f, orig);
        assert_eq!(f.detections.len(), 2);
    }
}

#[test]
fn missing_depth_scale_is_named() {
    let (_dir, path, _) = fixture();
    edit_manifest(&path, |v| {
        v["depth"].as_object_mut().unwrap().remove("scale");
    });
    match load_manifest(&path) {
        Err(DatasetError::MissingField(f)) => assert_eq!(f, "depth_scale"),
        other => panic!("expected MissingField, got {other:?}"),
    }
}

#[test]
fn missing_top_level_field_and_bad_version() {
    let (_dir, path, _) = fixture();
    edit_manifest(&path, |v| {
        v["schema_version"] = 9.into();
    });
    assert!(matches!(load_manifest(&path), Err(DatasetError::SchemaVersionUnsupported(9))));
    edit_manifest(&path, |v| {
        v.as_object_mut().unwrap().remove("frames");
    });
    assert!(matches!(load_manifest(&path), Err(DatasetError::MissingField(f)) if f == "frames"));
}

#[test]
fn embedding_dim_disagreeing_with_table() {
    let (_dir, path, _) = fixture();
    edit_manifest(&path, |v| {
        v["embedding_dim"] = 12.into();
    });
    assert!(matches!(load_manifest(&path), Err(DatasetError::EmbeddingDimMismatch { expected: 12, found: 16 })));
}

#[test]
fn non_unit_embedding_is_an_invariant_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut frames = three_frames();
    frames[1].detections[0].embedding[TABLE as usize] = 2.0;
    let path = write_dataset(dir.path(), &toy_table(), &frames);
    let ds = load_manifest(&path).unwrap();
    ds.load_frame(0).unwrap();
    match ds.load_frame(1) {
        Err(DatasetError::InvariantViolation { frame: 1, detection: 0, .. }) => {}
        other => panic!("expected InvariantViolation, got {other:?}"),
    }
}

#[test]
fn truncated_depth_is_corrupt() {
    let (dir, path, frames) = fixture();
    let depth = dir.path().join(&frames[2].depth_path);
    let bytes = std::fs::read(&depth).unwrap();
    std::fs::write(&depth, &bytes[..bytes.len() - 2]).unwrap();
    let ds = load_manifest(&path).unwrap();
    assert!(matches!(ds.load_frame(2), Err(DatasetError::CorruptBlob { .. })));
}

#[test]
fn index_out_of_range() {
    let (_dir, path, _) = fixture();
    let ds = load_manifest(&path).unwrap();
    assert!(matches!(ds.load_frame(3), Err(DatasetError::IndexOutOfRange { index: 3, count: 3 })));
}

#[test]
fn embeddings_can_live_in_a_side_file() {
    let (dir, path, frames) = fixture();
    // Two vectors back to back; the second starts at byte DIM * 4.
    let vecs = [synonym(COUCH, 0), frames[0].detections[0].embedding.clone()];
    let bytes: Vec<u8> = vecs.iter().flatten().flat_map(|x| x.to_le_bytes()).collect();
    std::fs::write(dir.path().join("emb.f32"), bytes).unwrap();
    edit_manifest(&path, |v| {
        v["frames"][0]["detections"][0]["embedding"] =
            serde_json::to_value(EmbeddingRef::File { path: "emb.f32".into(), offset: (DIM * 4) as u64 }).unwrap();
    });
    let ds = load_manifest(&path).unwrap();
    assert_same(&ds.load_frame(0).unwrap(), &frames[0]);

    edit_manifest(&path, |v| {
        v["frames"][0]["detections"][0]["embedding"]["offset"] = (DIM * 4 + 4).into();
    });
    let ds = load_manifest(&path).unwrap();
    assert!(matches!(ds.load_frame(0), Err(DatasetError::CorruptBlob { .. })));
}

#[test]
fn duplicate_frame_index_is_rejected() {
    let (_dir, path, _) = fixture();
    edit_manifest(&path, |v| {
        v["frames"][2]["index"] = 1.into();
    });
    assert!(matches!(load_manifest(&path), Err(DatasetError::DuplicateFrameIndex(1))));
}

#[test]
fn blurry_filter_keeps_order_and_is_idempotent() {
    let mut frames = three_frames();
    frames[1].blurry = true;
    let kept = filter_blurry(frames.clone());
    assert_eq!(kept.iter().map(|f| f.index).collect::<Vec<_>>(), vec![0, 2]);
    assert_eq!(filter_blurry(kept.clone()), kept);
    for f in &mut frames {
        f.blurry = true;
    }
    assert!(filter_blurry(frames).is_empty());
    assert!(filter_blurry(Vec::new()).is_empty());
}
