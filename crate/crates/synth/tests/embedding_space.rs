use promptmap::retrieval::{cosine, retrieve_category};
use promptmap::category::SizePolicy;
use promptmap_synth::taxonomy::coco_stuff;
use promptmap_synth::SynthEmbeddingSpace;
use proptest::prelude::*;

fn space(angle: f64) -> (SynthEmbeddingSpace, promptmap::category::CategoryTable) {
    let specs = coco_stuff();
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let space = SynthEmbeddingSpace::new(&names, 192, angle, 17).unwrap();
    let table = space.category_table(&specs, SizePolicy::default()).unwrap();
    (space, table)
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn too_small_dimension_or_bad_angle_is_rejected() {
    let names: Vec<String> = (0..8).map(|i| format!("c{i}")).collect();
    assert!(SynthEmbeddingSpace::new(&names, 8, 30.0, 1).is_err());
    assert!(SynthEmbeddingSpace::new(&names, 16, 90.0, 1).is_err());
    assert!(SynthEmbeddingSpace::new(&names, 16, -1.0, 1).is_err());
}

#[test]
fn anchors_are_orthonormal() {
    let (space, _) = space(30.0);
    let anchors: Vec<Vec<f32>> = (0..171).map(|c| space.anchor(c)).collect();
    for (i, a) in anchors.iter().enumerate() {
        assert!((norm(a) - 1.0).abs() < 1e-5);
        for b in &anchors[i + 1..] {
            assert!(cosine(a, b).abs() < 1e-5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synonyms_stay_closest_to_their_anchor(cat in 0usize..171, label in "[a-z]{3,12}( [a-z]{3,8})?", angle in 0.0f64..80.0) {
        let (space, table) = space(angle);
        let v = space.rotated(cat, &label, angle.to_radians());
        prop_assert!((norm(&v) - 1.0).abs() < 1e-5);
        let own = cosine(&v, &space.anchor(cat));
        prop_assert!((own - angle.to_radians().cos()).abs() < 1e-4);
        let (got, score) = retrieve_category(&v, &table).unwrap();
        prop_assert_eq!(got as usize, cat);
        prop_assert!((score - own).abs() < 1e-6);
    }
}
