//! Language-conditioned retrieval over dynamic descriptors.

use crate::fusion::PanopticMap;
use crate::retrieval::{cosine, normalize_label};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("embedding dimension {found} does not match map dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding mode requires a query embedding")]
    EmbeddingRequired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    /// Submaps whose label set contains the normalised query text.
    Exact,
    /// Max cosine over stored label embeddings and the category embedding.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub submap_id: u32,
    pub score: f64,
    pub matched_label: String,
    pub category: String,
}

/// Top-`k` submaps by `(score desc, submap id asc)`. Exact mode returns only
/// matching submaps (score 1).
pub fn query(
    map: &PanopticMap,
    text: &str,
    embedding: Option<&[f32]>,
    mode: QueryMode,
    k: usize,
) -> Result<Vec<QueryHit>, QueryError> {
    let table = map.categories();
    let category_name = |id: u32| table.get(id).map(|c| c.name.clone()).unwrap_or_else(|| id.to_string());
    let mut hits = Vec::new();
    match mode {
        QueryMode::Exact => {
            let needle = normalize_label(text);
            for s in map.submaps().values() {
                let Some(d) = &s.descriptor else { continue };
                if d.labels.contains_key(&needle) {
                    hits.push(QueryHit {
                        submap_id: s.id,
                        score: 1.0,
                        matched_label: needle.clone(),
                        category: category_name(d.current_category),
                    });
                }
            }
        }
        QueryMode::Embedding => {
            let q = embedding.ok_or(QueryError::EmbeddingRequired)?;
            if q.len() != map.embedding_dim() {
                return Err(QueryError::DimensionMismatch { expected: map.embedding_dim(), found: q.len() });
            }
            for s in map.submaps().values() {
                let Some(d) = &s.descriptor else { continue };
                let name = category_name(d.current_category);
                let mut best = (f64::NEG_INFINITY, String::new());
                for (label, entry) in &d.labels {
                    let c = cosine(q, &entry.embedding);
                    if c > best.0 {
                        best = (c, label.clone());
                    }
                }
                if let Some(cat) = table.get(d.current_category) {
                    let c = cosine(q, &cat.embedding);
                    if c > best.0 {
                        best = (c, name.clone());
                    }
                }
                if best.0.is_finite() {
                    hits.push(QueryHit {
                        submap_id: s.id,
                        score: best.0.clamp(-1.0, 1.0),
                        matched_label: best.1,
                        category: name,
                    });
                }
            }
        }
    }
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.submap_id.cmp(&b.submap_id)));
    hits.truncate(k);
    Ok(hits)
}
