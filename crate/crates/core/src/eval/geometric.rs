//! Point-cloud reconstruction metrics.
//!
//! Distances are computed in meters and reported in centimeters. Accuracy is
//! the mean reconstruction→ground-truth nearest distance, completeness the
//! mean ground-truth→reconstruction one.

use super::kdtree::KdTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Relative slack on closed distance thresholds, so that a point at exactly
/// the threshold (up to rounding in the squared-distance sum) counts as inside.
pub const THRESHOLD_RELATIVE_SLACK: f64 = 1e-9;
pub const DEFAULT_COMPLETION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("{0} point cloud is empty")]
    EmptyCloud(&'static str),
    #[error("all points are background after filtering")]
    AllPointsBackground,
    #[error("label count {labels} does not match point count {points}")]
    LabelMismatch { labels: usize, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricReport {
    pub accuracy_cm: f64,
    pub completeness_cm: f64,
    /// Sum of squared nearest distances in both directions, cm².
    pub chamfer_eq4: f64,
    /// `(accuracy + completeness) / 2`, cm.
    pub chamfer_reported_cm: f64,
    pub hausdorff_cm: f64,
    pub completion_ratio_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_detail: Option<f64>,
    pub reconstruction_points: usize,
    pub ground_truth_points: usize,
}

impl GeometricReport {
    pub const CSV_HEADER: &'static str = "accuracy_cm,completeness_cm,chamfer_cm,hausdorff_cm,completion_ratio_pct,f1";

    /// One row in the column order of the usual results tables.
    pub fn csv_row(&self) -> String {
        format!(
            "{:.2},{:.2},{:.2},{:.2},{:.2},{}",
            self.accuracy_cm,
            self.completeness_cm,
            self.chamfer_reported_cm,
            self.hausdorff_cm,
            self.completion_ratio_pct,
            self.f1_detail.map(|f| format!("{:.2}", f * 100.0)).unwrap_or_default()
        )
    }
}

/// Squared nearest distance from every query point to `target`.
pub fn nearest_squared_distances(queries: &[[f64; 3]], target: &KdTree) -> Vec<f64> {
    queries.par_iter().map(|q| target.nearest_squared(q).unwrap_or(f64::INFINITY)).collect()
}

#[inline]
pub(crate) fn within(d2: f64, threshold: f64) -> bool {
    d2.sqrt() <= threshold * (1.0 + THRESHOLD_RELATIVE_SLACK)
}

pub fn geometric_metrics(
    reconstruction: &[[f64; 3]],
    ground_truth: &[[f64; 3]],
    threshold: f64,
) -> Result<GeometricReport, GeometryError> {
    if reconstruction.is_empty() {
        return Err(GeometryError::EmptyCloud("reconstruction"));
    }
    if ground_truth.is_empty() {
        return Err(GeometryError::EmptyCloud("ground-truth"));
    }
    let r_tree = KdTree::new(reconstruction);
    let g_tree = KdTree::new(ground_truth);
    let r_to_g = nearest_squared_distances(reconstruction, &g_tree);
    let g_to_r = nearest_squared_distances(ground_truth, &r_tree);

    let mean = |d2: &[f64]| d2.iter().map(|d| d.sqrt()).sum::<f64>() / d2.len() as f64;
    let max = |d2: &[f64]| d2.iter().map(|d| d.sqrt()).fold(0.0, f64::max);
    let accuracy = mean(&r_to_g) * 100.0;
    let completeness = mean(&g_to_r) * 100.0;
    let chamfer_eq4 = (g_to_r.iter().sum::<f64>() + r_to_g.iter().sum::<f64>()) * 1e4;
    let hausdorff = max(&r_to_g).max(max(&g_to_r)) * 100.0;
    let covered = g_to_r.iter().filter(|&&d2| within(d2, threshold)).count();
    Ok(GeometricReport {
        accuracy_cm: accuracy,
        completeness_cm: completeness,
        chamfer_eq4,
        chamfer_reported_cm: (accuracy + completeness) / 2.0,
        hausdorff_cm: hausdorff,
        completion_ratio_pct: 100.0 * covered as f64 / ground_truth.len() as f64,
        f1_detail: None,
        reconstruction_points: reconstruction.len(),
        ground_truth_points: ground_truth.len(),
    })
}

/// F1 of the non-background points: precision over reconstruction points
/// within `threshold` of the ground truth, recall over ground-truth points
/// within `threshold` of the reconstruction.
pub fn f1_detail(
    reconstruction: &[[f64; 3]],
    reconstruction_labels: &[u32],
    ground_truth: &[[f64; 3]],
    ground_truth_labels: &[u32],
    background: &BTreeSet<u32>,
    threshold: f64,
) -> Result<f64, GeometryError> {
    for (points, labels) in [(reconstruction, reconstruction_labels), (ground_truth, ground_truth_labels)] {
        if points.len() != labels.len() {
            return Err(GeometryError::LabelMismatch { labels: labels.len(), points: points.len() });
        }
    }
    let keep = |pts: &[[f64; 3]], labels: &[u32]| -> Vec<[f64; 3]> {
        pts.iter().zip(labels).filter(|(_, l)| !background.contains(l)).map(|(p, _)| *p).collect()
    };
    let r = keep(reconstruction, reconstruction_labels);
    let g = keep(ground_truth, ground_truth_labels);
    if r.is_empty() || g.is_empty() {
        return Err(GeometryError::AllPointsBackground);
    }
    let precision = nearest_squared_distances(&r, &KdTree::new(&g)).iter().filter(|&&d| within(d, threshold)).count()
        as f64
        / r.len() as f64;
    let recall = nearest_squared_distances(&g, &KdTree::new(&r)).iter().filter(|&&d| within(d, threshold)).count()
        as f64
        / g.len() as f64;
    Ok(if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) })
}
