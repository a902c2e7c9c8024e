//! Open-vocabulary label → unified category retrieval.

use crate::category::{CategoryTable, SizeClass};
use crate::dataset::Detection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("embedding dimension {found} does not match table dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("category table is empty")]
    EmptyTable,
    #[error("query embedding has zero norm")]
    ZeroEmbedding,
}

const SINGULAR_EXCEPTIONS: [&str; 5] = ["glass", "grass", "bus", "gas", "lens"];

fn singularize_once(word: &str) -> String {
    if SINGULAR_EXCEPTIONS.contains(&word) {
        return word.to_string();
    }
    if word.len() > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if word.ends_with("ses") {
        // "-ses" → "-s", but only where the stem keeps its own final s
        // ("glasses", "buses"); "horses" falls through to the plain -s rule.
        let stem = &word[..word.len() - 2];
        if stem.ends_with("ss") || SINGULAR_EXCEPTIONS.contains(&stem) {
            return stem.to_string();
        }
    }
    if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

fn singularize(word: &str) -> String {
    let mut current = word.to_string();
    loop {
        let next = singularize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Lowercases, trims, collapses whitespace and singularises the head (last)
/// word of a label. Idempotent.
pub fn normalize_label(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let mut words: Vec<&str> = lower.split_whitespace().collect();
    let Some(last) = words.pop() else {
        return String::new();
    };
    let head = singularize(last);
    words.push(&head);
    words.join(" ")
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Exhaustive cosine scan over the table; ties go to the lowest category id.
pub fn retrieve_category(embedding: &[f32], table: &CategoryTable) -> Result<(u32, f64), RetrievalError> {
    if embedding.len() != table.embedding_dim() {
        return Err(RetrievalError::DimensionMismatch { expected: table.embedding_dim(), found: embedding.len() });
    }
    let norm = embedding.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(RetrievalError::ZeroEmbedding);
    }
    let query: Vec<f64> = embedding.iter().map(|&x| x as f64 / norm).collect();
    let mut best: Option<(u32, f64)> = None;
    // Table categories are sorted by id, so a strict `>` keeps the lowest id on ties.
    for c in table.categories() {
        let sim: f64 = query.iter().zip(&c.embedding).map(|(q, &e)| q * e as f64).sum();
        if best.is_none_or(|(_, s)| sim > s) {
            best = Some((c.id, sim));
        }
    }
    best.ok_or(RetrievalError::EmptyTable)
}

/// Per-detection semantic tuple: normalised label, its embedding, the
/// retrieved unified category and the inherited size class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryDescriptor {
    pub label: String,
    pub embedding: Vec<f32>,
    pub category_id: u32,
    pub similarity: f64,
    pub size_class: SizeClass,
}

pub fn make_elementary_descriptor(
    detection: &Detection,
    table: &CategoryTable,
) -> Result<ElementaryDescriptor, RetrievalError> {
    let (category_id, similarity) = retrieve_category(&detection.embedding, table)?;
    let size_class = table.get(category_id).expect("retrieved id exists").size_class;
    Ok(ElementaryDescriptor {
        label: normalize_label(&detection.label),
        embedding: detection.embedding.clone(),
        category_id,
        similarity,
        size_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::{CategoryKind, SizePolicy, UnifiedCategory};
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_label("Apples"), "apple");
        assert_eq!(normalize_label("chair"), "chair");
        assert_eq!(normalize_label("  Dining  Tables "), "dining table");
        assert_eq!(normalize_label(""), "");
        assert_eq!(normalize_label("   "), "");
        assert_eq!(normalize_label("Berries"), "berry");
        assert_eq!(normalize_label("glasses"), "glass");
        assert_eq!(normalize_label("buses"), "bus");
        assert_eq!(normalize_label("glass"), "glass");
        assert_eq!(normalize_label("lens"), "lens");
        assert_eq!(normalize_label("horses"), "horse");
        assert_eq!(normalize_label("cups"), "cup");
        assert_eq!(normalize_label("bus"), "bus");
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "[A-Za-z ]{0,24}") {
            let once = normalize_label(&s);
            prop_assert_eq!(normalize_label(&once), once);
        }
    }

    fn axis_table(n: usize) -> CategoryTable {
        let cats = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                UnifiedCategory {
                    id: i as u32,
                    name: format!("c{i}"),
                    kind: CategoryKind::Thing,
                    size_class: SizeClass::Medium,
                    embedding: e,
                }
            })
            .collect();
        CategoryTable::new(cats, n, SizePolicy::default()).unwrap()
    }

    #[test]
    fn identity_and_tie_break() {
        let t = axis_table(8);
        let mut q = vec![0.0; 8];
        q[7] = 1.0;
        assert_eq!(retrieve_category(&q, &t).unwrap(), (7, 1.0));
        let mut q = vec![0.0; 8];
        q[2] = 1.0;
        q[5] = 1.0;
        assert_eq!(retrieve_category(&q, &t).unwrap().0, 2);
    }

    #[test]
    fn dimension_checked() {
        let t = axis_table(3);
        assert_eq!(
            retrieve_category(&[1.0, 0.0], &t),
            Err(RetrievalError::DimensionMismatch { expected: 3, found: 2 })
        );
    }
}
