//! Surface point extraction from submaps.

use crate::fusion::{PanopticMap, Submap, SubmapKind};
use serde::{Deserialize, Serialize};

/// Extraction band around the zero level set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Band {
    /// Absolute band in meters, shared by every submap.
    Meters(f64),
    /// Band as a multiple of each submap's own voxel size.
    VoxelFactor(f64),
}

impl Default for Band {
    fn default() -> Self {
        Band::VoxelFactor(0.5)
    }
}

impl Band {
    fn meters_for(&self, voxel_size: f64) -> f64 {
        match *self {
            Band::Meters(m) => m,
            Band::VoxelFactor(f) => f * voxel_size,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfacePointCloud {
    pub points: Vec<[f64; 3]>,
    pub submap_ids: Vec<u32>,
    /// Current category of the owning submap; `u32::MAX` for free space.
    pub category_ids: Vec<u32>,
}

impl SurfacePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: SurfacePointCloud) {
        self.points.extend(other.points);
        self.submap_ids.extend(other.submap_ids);
        self.category_ids.extend(other.category_ids);
    }

    /// Keeps the points for which `keep(submap_id, category_id)` holds.
    pub fn filter(&self, mut keep: impl FnMut(u32, u32) -> bool) -> SurfacePointCloud {
        let mut out = SurfacePointCloud::default();
        for i in 0..self.len() {
            if keep(self.submap_ids[i], self.category_ids[i]) {
                out.points.push(self.points[i]);
                out.submap_ids.push(self.submap_ids[i]);
                out.category_ids.push(self.category_ids[i]);
            }
        }
        out
    }
}

/// Voxel centres with weight > 0 and `|tsdf| <= band`, in block then voxel
/// order. A non-positive band yields an empty cloud.
pub fn extract_submap_points(submap: &Submap, band: Band) -> SurfacePointCloud {
    let mut out = SurfacePointCloud::default();
    let b = band.meters_for(submap.voxel_size());
    if !(b > 0.0) {
        return out;
    }
    let category = submap.category().unwrap_or(u32::MAX);
    submap.grid.for_each_voxel(|v, tsdf, weight| {
        if weight > 0.0 && (tsdf.abs() as f64) <= b {
            let c = submap.grid.voxel_center(v);
            out.points.push([c.x, c.y, c.z]);
            out.submap_ids.push(submap.id);
            out.category_ids.push(category);
        }
    });
    out
}

/// Concatenation of every non-freespace submap's points in id order.
pub fn extract_points(map: &PanopticMap, band: Band) -> SurfacePointCloud {
    let mut out = SurfacePointCloud::default();
    for s in map.submaps().values().filter(|s| s.kind != SubmapKind::Freespace) {
        out.extend(extract_submap_points(s, band));
    }
    out
}
