//! Unified category taxonomy and voxel-size priors.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Embeddings within this distance of unit norm are silently re-normalised.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CategoryError {
    #[error("io error reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed category table: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate category name {0:?}")]
    DuplicateCategoryName(String),
    #[error("duplicate category id {0}")]
    DuplicateCategoryId(u32),
    #[error("category {name:?} has a bad embedding (norm {norm})")]
    BadEmbedding { name: String, norm: f64 },
    #[error("embedding dimension mismatch: expected {expected}, found {found} ({context})")]
    EmbeddingDimMismatch { expected: usize, found: usize, context: String },
    #[error("invalid size policy: {0}")]
    InvalidSizePolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryKind {
    Thing,
    Stuff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SizeClass {
    #[serde(alias = "small")]
    Small,
    #[serde(alias = "medium")]
    Medium,
    #[serde(alias = "large")]
    Large,
}

/// Voxel edge length (meters) per size class, plus the free-space resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizePolicy {
    pub small: f64,
    pub medium: f64,
    pub large: f64,
    pub freespace: f64,
}

impl Default for SizePolicy {
    fn default() -> Self {
        Self { small: 0.02, medium: 0.03, large: 0.05, freespace: 0.30 }
    }
}

impl SizePolicy {
    pub fn voxel_size(&self, class: SizeClass) -> f64 {
        match class {
            SizeClass::Small => self.small,
            SizeClass::Medium => self.medium,
            SizeClass::Large => self.large,
        }
    }

    pub fn validate(&self) -> Result<(), CategoryError> {
        for (name, v) in [
            ("small", self.small),
            ("medium", self.medium),
            ("large", self.large),
            ("freespace", self.freespace),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CategoryError::InvalidSizePolicy(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedCategory {
    pub id: u32,
    pub name: String,
    pub kind: CategoryKind,
    pub size_class: SizeClass,
    pub embedding: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TableRepr")]
pub struct CategoryTable {
    categories: Vec<UnifiedCategory>,
    embedding_dim: usize,
    size_policy: SizePolicy,
    #[serde(skip)]
    by_id: BTreeMap<u32, usize>,
}

#[derive(Deserialize)]
struct TableRepr {
    categories: Vec<UnifiedCategory>,
    embedding_dim: usize,
    size_policy: SizePolicy,
}

impl From<TableRepr> for CategoryTable {
    fn from(r: TableRepr) -> Self {
        let by_id = r.categories.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
        Self { categories: r.categories, embedding_dim: r.embedding_dim, size_policy: r.size_policy, by_id }
    }
}

impl CategoryTable {
    /// Validates and normalises a set of categories. Categories are kept
    /// sorted by id so that scans visit the lowest id first.
    pub fn new(
        mut categories: Vec<UnifiedCategory>,
        embedding_dim: usize,
        size_policy: SizePolicy,
    ) -> Result<Self, CategoryError> {
        size_policy.validate()?;
        categories.sort_by_key(|c| c.id);
        let mut names = std::collections::BTreeSet::new();
        let mut by_id = BTreeMap::new();
        for (i, c) in categories.iter_mut().enumerate() {
            if !names.insert(c.name.clone()) {
                return Err(CategoryError::DuplicateCategoryName(c.name.clone()));
            }
            if by_id.insert(c.id, i).is_some() {
                return Err(CategoryError::DuplicateCategoryId(c.id));
            }
            if c.embedding.len() != embedding_dim {
                return Err(CategoryError::EmbeddingDimMismatch {
                    expected: embedding_dim,
                    found: c.embedding.len(),
                    context: format!("category {:?}", c.name),
                });
            }
            let norm = l2_norm(&c.embedding);
            if !norm.is_finite() || (norm - 1.0).abs() > RENORMALIZE_TOLERANCE {
                return Err(CategoryError::BadEmbedding { name: c.name.clone(), norm });
            }
            if norm != 1.0 {
                for x in c.embedding.iter_mut() {
                    *x = (*x as f64 / norm) as f32;
                }
            }
        }
        Ok(Self { categories, embedding_dim, size_policy, by_id })
    }

    pub fn categories(&self) -> &[UnifiedCategory] {
        &self.categories
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn size_policy(&self) -> &SizePolicy {
        &self.size_policy
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&UnifiedCategory> {
        self.by_id.get(&id).map(|&i| &self.categories[i])
    }

    pub fn by_name(&self, name: &str) -> Option<&UnifiedCategory> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn voxel_size_of(&self, id: u32) -> Option<f64> {
        self.get(id).map(|c| self.size_policy.voxel_size(c.size_class))
    }

    /// Serialised form of the on-disk table: a JSON array of categories.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.categories).expect("categories serialise")
    }
}

/// Loads a JSON array of `{id, name, kind, size_class, embedding}` entries.
///
/// `embedding_dim` is inferred from the first entry when not given.
pub fn load_category_table(
    path: &Path,
    embedding_dim: Option<usize>,
    size_policy: SizePolicy,
) -> Result<CategoryTable, CategoryError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CategoryError::Io { path: path.display().to_string(), source })?;
    let categories: Vec<UnifiedCategory> = serde_json::from_str(&text)?;
    let dim = embedding_dim
        .or_else(|| categories.first().map(|c| c.embedding.len()))
        .unwrap_or(0);
    CategoryTable::new(categories, dim, size_policy)
}

pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(id: u32, name: &str, size: SizeClass, emb: Vec<f32>) -> UnifiedCategory {
        UnifiedCategory { id, name: name.into(), kind: CategoryKind::Thing, size_class: size, embedding: emb }
    }

    #[test]
    fn toy_table_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cats.json");
        std::fs::write(
            &path,
            r#"[{"id":0,"name":"book","kind":"thing","size_class":"Small","embedding":[1,0,0]},
                {"id":1,"name":"chair","kind":"thing","size_class":"medium","embedding":[0,1,0]},
                {"id":2,"name":"wall","kind":"stuff","size_class":"Large","embedding":[0,0,1]}]"#,
        )
        .unwrap();
        let t = load_category_table(&path, None, SizePolicy::default()).unwrap();
        assert_eq!(t.embedding_dim(), 3);
        assert_eq!(t.len(), 3);
        assert_eq!(t.voxel_size_of(1), Some(0.03));
        assert_eq!(t.get(2).unwrap().kind, CategoryKind::Stuff);
    }

    #[test]
    fn duplicate_name_rejected() {
        let err = CategoryTable::new(
            vec![
                cat(0, "chair", SizeClass::Medium, vec![1.0, 0.0]),
                cat(1, "chair", SizeClass::Medium, vec![0.0, 1.0]),
            ],
            2,
            SizePolicy::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CategoryError::DuplicateCategoryName(n) if n == "chair"));
    }

    #[test]
    fn near_unit_embeddings_renormalised_far_ones_rejected() {
        let t = CategoryTable::new(vec![cat(0, "a", SizeClass::Small, vec![1.0005, 0.0])], 2, SizePolicy::default())
            .unwrap();
        assert_eq!(t.get(0).unwrap().embedding, vec![1.0, 0.0]);
        let err = CategoryTable::new(vec![cat(0, "a", SizeClass::Small, vec![0.5, 0.0])], 2, SizePolicy::default())
            .unwrap_err();
        assert!(matches!(err, CategoryError::BadEmbedding { .. }));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = CategoryTable::new(vec![cat(0, "a", SizeClass::Small, vec![1.0, 0.0])], 3, SizePolicy::default())
            .unwrap_err();
        assert!(matches!(err, CategoryError::EmbeddingDimMismatch { expected: 3, found: 2, .. }));
    }

    #[test]
    fn default_policy_values() {
        let p = SizePolicy::default();
        assert_eq!((p.small, p.medium, p.large, p.freespace), (0.02, 0.03, 0.05, 0.30));
        assert!(SizePolicy { small: 0.0, ..p }.validate().is_err());
    }
}
