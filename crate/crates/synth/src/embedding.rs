//! Engineered label embeddings.
//!
//! Category anchors are an orthonormal set. A synonym of a category is its
//! anchor rotated by a fixed angle towards a label-specific direction that is
//! orthogonal to every anchor, so its cosine with the own anchor is `cos θ`
//! and with any other anchor exactly zero.

use crate::taxonomy::CategorySpec;
use crate::SynthError;
use promptmap::category::{CategoryTable, SizePolicy, UnifiedCategory};
use promptmap::retrieval::normalize_label;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEmbeddingSpace {
    dim: usize,
    angle: f64,
    names: Vec<String>,
    anchors: Vec<Vec<f64>>,
}

fn gaussian(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the components along `basis` (orthonormal) and normalises; `None`
/// if nothing is left.
fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    // Two passes keep the result orthogonal to working precision.
    for _ in 0..2 {
        for b in basis {
            let d = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
    }
    let n = dot(&v, &v).sqrt();
    (n > 1e-6).then(|| v.into_iter().map(|x| x / n).collect())
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn label_seed(key: &str) -> u64 {
    let digest = Sha256::digest(key.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

impl SynthEmbeddingSpace {
    /// `angle_deg` must be in `[0, 90)`; `dim` must exceed the category count
    /// so synonym directions exist.
    pub fn new(names: &[String], dim: usize, angle_deg: f64, seed: u64) -> Result<Self, SynthError> {
        if !(0.0..90.0).contains(&angle_deg) {
            return Err(SynthError::SpecInvalid(format!("synonym angle {angle_deg} outside [0, 90)")));
        }
        if dim <= names.len() {
            return Err(SynthError::SpecInvalid(format!(
                "embedding_dim {dim} must exceed the category count {}",
                names.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut anchors: Vec<Vec<f64>> = Vec::with_capacity(names.len());
        while anchors.len() < names.len() {
            if let Some(a) = orthonormalize(gaussian(dim, &mut rng), &anchors) {
                anchors.push(a);
            }
        }
        Ok(Self { dim, angle: angle_deg.to_radians(), names: names.to_vec(), anchors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn angle_rad(&self) -> f64 {
        self.angle
    }

    pub fn anchor(&self, category: usize) -> Vec<f32> {
        to_f32(&self.anchors[category])
    }

    /// Unit direction for `key`, orthogonal to all anchors.
    fn residual(&self, key: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(label_seed(key));
        loop {
            if let Some(r) = orthonormalize(gaussian(self.dim, &mut rng), &self.anchors) {
                return r;
            }
        }
    }

    /// Anchor of `category` rotated by `angle` towards the direction of `key`.
    pub fn rotated(&self, category: usize, key: &str, angle: f64) -> Vec<f32> {
        let r = self.residual(key);
        let (s, c) = angle.sin_cos();
        let v: Vec<f64> = self.anchors[category].iter().zip(&r).map(|(a, r)| c * a + s * r).collect();
        let n = dot(&v, &v).sqrt();
        v.iter().map(|x| (x / n) as f32).collect()
    }

    /// A label equal (after normalisation) to a category name embeds to that
    /// category's anchor; any other label is a synonym of `category`.
    pub fn embed_label(&self, label: &str, category: usize) -> Vec<f32> {
        let key = normalize_label(label);
        match self.names.iter().position(|n| normalize_label(n) == key) {
            Some(i) => self.anchor(i),
            None => self.rotated(category, &key, self.angle),
        }
    }

    /// Category table with ids `0..n` in the order given.
    pub fn category_table(&self, specs: &[CategorySpec], policy: SizePolicy) -> Result<CategoryTable, SynthError> {
        let categories = specs
            .iter()
            .enumerate()
            .map(|(i, c)| UnifiedCategory {
                id: i as u32,
                name: c.name.clone(),
                kind: c.kind,
                size_class: c.size_class,
                embedding: self.anchor(i),
            })
            .collect();
        CategoryTable::new(categories, self.dim, policy).map_err(|e| SynthError::SpecInvalid(e.to_string()))
    }
}
