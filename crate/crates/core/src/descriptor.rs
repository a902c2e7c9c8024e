//! Per-object dynamic descriptors: every label an object was observed with,
//! majority-voted unified category and the size class it inherits.

use crate::category::{CategoryTable, SizeClass};
use crate::retrieval::ElementaryDescriptor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub count: u32,
    /// Embedding of the first observation of this label.
    pub embedding: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicDescriptor {
    pub labels: BTreeMap<String, LabelEntry>,
    pub category_votes: BTreeMap<u32, u32>,
    pub current_category: u32,
    pub size_class: SizeClass,
    /// Number of times majority voting replaced the current category.
    #[serde(default)]
    pub category_flips: u32,
}

impl DynamicDescriptor {
    pub fn from_elementary(e: &ElementaryDescriptor) -> Self {
        let mut d = Self {
            labels: BTreeMap::new(),
            category_votes: BTreeMap::new(),
            current_category: e.category_id,
            size_class: e.size_class,
            category_flips: 0,
        };
        d.record(e);
        d
    }

    fn record(&mut self, e: &ElementaryDescriptor) {
        self.labels
            .entry(e.label.clone())
            .and_modify(|l| l.count += 1)
            .or_insert_with(|| LabelEntry { count: 1, embedding: e.embedding.clone() });
        *self.category_votes.entry(e.category_id).or_insert(0) += 1;
    }

    /// Accumulates the label and category vote. A differing category triggers
    /// a majority vote in which the incumbent wins ties.
    pub fn update(&mut self, e: &ElementaryDescriptor, table: &CategoryTable) {
        self.record(e);
        if e.category_id == self.current_category {
            return;
        }
        let incumbent_votes = self.votes_for(self.current_category);
        let mut best = (self.current_category, incumbent_votes);
        for (&cat, &votes) in &self.category_votes {
            if votes > best.1 {
                best = (cat, votes);
            }
        }
        if best.0 != self.current_category {
            self.current_category = best.0;
            self.category_flips += 1;
            if let Some(c) = table.get(best.0) {
                self.size_class = c.size_class;
            }
        }
    }

    pub fn votes_for(&self, category: u32) -> u32 {
        self.category_votes.get(&category).copied().unwrap_or(0)
    }

    pub fn label_total(&self) -> u32 {
        self.labels.values().map(|l| l.count).sum()
    }

    pub fn check_invariants(&self, table: &CategoryTable) -> Result<(), String> {
        let cur = self.votes_for(self.current_category);
        if cur == 0 {
            return Err("current category has no votes".into());
        }
        if self.category_votes.values().any(|&v| v > cur) {
            return Err("current category is not a vote maximum".into());
        }
        if let Some(c) = table.get(self.current_category) {
            if c.size_class != self.size_class {
                return Err("size class disagrees with current category".into());
            }
        }
        if self.labels.is_empty() {
            return Err("no labels".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::{CategoryKind, SizePolicy, UnifiedCategory};

    fn table() -> CategoryTable {
        let mk = |id: u32, name: &str, size| UnifiedCategory {
            id,
            name: name.into(),
            kind: CategoryKind::Thing,
            size_class: size,
            embedding: {
                let mut e = vec![0.0; 3];
                e[id as usize] = 1.0;
                e
            },
        };
        CategoryTable::new(
            vec![mk(0, "couch", SizeClass::Large), mk(1, "table", SizeClass::Large), mk(2, "dining table", SizeClass::Medium)],
            3,
            SizePolicy::default(),
        )
        .unwrap()
    }

    fn elem(label: &str, cat: u32, t: &CategoryTable) -> ElementaryDescriptor {
        ElementaryDescriptor {
            label: label.into(),
            embedding: t.get(cat).unwrap().embedding.clone(),
            category_id: cat,
            similarity: 1.0,
            size_class: t.get(cat).unwrap().size_class,
        }
    }

    #[test]
    fn same_category_is_no_change() {
        let t = table();
        let mut d = DynamicDescriptor::from_elementary(&elem("couch", 0, &t));
        d.update(&elem("couch", 0, &t), &t);
        d.update(&elem("couch", 0, &t), &t);
        let before = d.clone();
        d.update(&elem("couch", 0, &t), &t);
        assert_eq!(d.current_category, before.current_category);
        assert_eq!(d.votes_for(0), 4);
        assert_eq!(d.labels["couch"].count, 4);
    }

    #[test]
    fn majority_flip_after_crossing() {
        let t = table();
        let mut d = DynamicDescriptor::from_elementary(&elem("table", 1, &t));
        d.update(&elem("table", 1, &t), &t);
        d.update(&elem("dining table", 2, &t), &t);
        assert_eq!(d.current_category, 1);
        d.update(&elem("dining table", 2, &t), &t);
        // 2 vs 2: incumbent keeps it.
        assert_eq!(d.current_category, 1);
        assert_eq!(d.size_class, SizeClass::Large);
        d.update(&elem("dining table", 2, &t), &t);
        assert_eq!(d.current_category, 2);
        assert_eq!(d.size_class, SizeClass::Medium);
        assert_eq!(d.label_total(), 5);
        assert_eq!(d.category_flips, 1);
        d.check_invariants(&t).unwrap();
    }
}
