//! Sparse block-hashed truncated signed distance grid.
//!
//! Voxel `i` along an axis covers `[i * voxel_size, (i + 1) * voxel_size)` and
//! its sample point is the centre `(i + 0.5) * voxel_size`. Voxels are grouped
//! into 8³ blocks that are allocated the first time one of their voxels is
//! updated. Positive distances lie in front of the surface (towards the camera).

use crate::camera::{CameraIntrinsics, Pose};
use crate::dataset::DepthImage;
use crate::mask::Mask;
use nalgebra::Vector3;
use std::collections::{BTreeMap, HashSet};

pub const BLOCK_SIDE: i64 = 8;
pub const BLOCK_VOXELS: usize = 512;

pub type BlockCoord = [i32; 3];
pub type VoxelIndex = [i64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub tsdf: Vec<f32>,
    pub weight: Vec<f32>,
}

impl Default for Block {
    fn default() -> Self {
        Self { tsdf: vec![0.0; BLOCK_VOXELS], weight: vec![0.0; BLOCK_VOXELS] }
    }
}

/// Linear index of a voxel inside its block: `x + 8 y + 64 z`.
#[inline]
pub fn local_index(local: [i64; 3]) -> usize {
    (local[0] + BLOCK_SIDE * local[1] + BLOCK_SIDE * BLOCK_SIDE * local[2]) as usize
}

#[inline]
pub fn split_index(v: VoxelIndex) -> (BlockCoord, usize) {
    let b = [
        v[0].div_euclid(BLOCK_SIDE) as i32,
        v[1].div_euclid(BLOCK_SIDE) as i32,
        v[2].div_euclid(BLOCK_SIDE) as i32,
    ];
    let l = [v[0].rem_euclid(BLOCK_SIDE), v[1].rem_euclid(BLOCK_SIDE), v[2].rem_euclid(BLOCK_SIDE)];
    (b, local_index(l))
}

#[inline]
pub fn join_index(block: BlockCoord, local: usize) -> VoxelIndex {
    let l = local as i64;
    [
        block[0] as i64 * BLOCK_SIDE + l % BLOCK_SIDE,
        block[1] as i64 * BLOCK_SIDE + (l / BLOCK_SIDE) % BLOCK_SIDE,
        block[2] as i64 * BLOCK_SIDE + l / (BLOCK_SIDE * BLOCK_SIDE),
    ]
}

/// Projective signed distance of a point at camera depth `z` to a surface
/// measured at depth `measured`.
#[inline]
pub fn projective_sdf(measured: f64, z: f64) -> f64 {
    measured - z
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsdfGrid {
    voxel_size: f64,
    truncation: f64,
    blocks: BTreeMap<BlockCoord, Block>,
}

impl TsdfGrid {
    pub fn new(voxel_size: f64, truncation: f64) -> Self {
        assert!(voxel_size > 0.0 && truncation > 0.0);
        Self { voxel_size, truncation, blocks: BTreeMap::new() }
    }

    pub(crate) fn from_blocks(voxel_size: f64, truncation: f64, blocks: BTreeMap<BlockCoord, Block>) -> Self {
        Self { voxel_size, truncation, blocks }
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn blocks(&self) -> &BTreeMap<BlockCoord, Block> {
        &self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn voxel_of(&self, p: &Vector3<f64>) -> VoxelIndex {
        [
            (p.x / self.voxel_size).floor() as i64,
            (p.y / self.voxel_size).floor() as i64,
            (p.z / self.voxel_size).floor() as i64,
        ]
    }

    pub fn voxel_center(&self, v: VoxelIndex) -> Vector3<f64> {
        Vector3::new(
            (v[0] as f64 + 0.5) * self.voxel_size,
            (v[1] as f64 + 0.5) * self.voxel_size,
            (v[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    /// `(tsdf, weight)` of an allocated voxel.
    #[inline]
    pub fn get(&self, v: VoxelIndex) -> Option<(f32, f32)> {
        let (b, l) = split_index(v);
        self.blocks.get(&b).map(|blk| (blk.tsdf[l], blk.weight[l]))
    }

    /// Centre and bounding-sphere radius of a block.
    pub fn block_sphere(&self, b: BlockCoord) -> (Vector3<f64>, f64) {
        let side = BLOCK_SIDE as f64 * self.voxel_size;
        let c = Vector3::new(
            (b[0] as f64 + 0.5) * side,
            (b[1] as f64 + 0.5) * side,
            (b[2] as f64 + 0.5) * side,
        );
        (c, 0.5 * side * 3f64.sqrt())
    }

    /// Trilinear interpolation of the distance field at `p`; fails unless all
    /// eight neighbouring voxel centres carry weight.
    pub fn sample(&self, p: &Vector3<f64>) -> Option<f64> {
        let f = [p.x / self.voxel_size - 0.5, p.y / self.voxel_size - 0.5, p.z / self.voxel_size - 0.5];
        let base = [f[0].floor() as i64, f[1].floor() as i64, f[2].floor() as i64];
        let t = [f[0] - base[0] as f64, f[1] - base[1] as f64, f[2] - base[2] as f64];
        let mut acc = 0.0;
        for corner in 0..8usize {
            let d = [(corner & 1) as i64, ((corner >> 1) & 1) as i64, ((corner >> 2) & 1) as i64];
            let (tsdf, weight) = self.get([base[0] + d[0], base[1] + d[1], base[2] + d[2]])?;
            if weight <= 0.0 {
                return None;
            }
            let mut w = 1.0;
            for axis in 0..3 {
                w *= if d[axis] == 1 { t[axis] } else { 1.0 - t[axis] };
            }
            acc += w * tsdf as f64;
        }
        Some(acc)
    }

    /// Fuses one depth image. Only pixels inside `mask` (all pixels when
    /// `None`) contribute. Every voxel touched by a pixel ray within the
    /// truncation band is updated once, using the depth at the pixel its
    /// centre projects to. Returns the number of voxels updated.
    pub fn integrate(
        &mut self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        pose: &Pose,
        mask: Option<&Mask>,
        w_max: f32,
    ) -> usize {
        let trunc = self.truncation;
        let (w, h) = (intrinsics.width as usize, intrinsics.height as usize);
        let mut touched: HashSet<VoxelIndex> = HashSet::new();
        for v in 0..h {
            for u in 0..w {
                if mask.is_some_and(|m| !m.get(u, v)) {
                    continue;
                }
                let Some(d) = depth.get(u, v) else { continue };
                let near = (d - trunc).max(1e-3);
                let a = pose.to_world(&intrinsics.backproject(u, v, near));
                let b = pose.to_world(&intrinsics.backproject(u, v, d + trunc));
                traverse_voxels(&a, &b, self.voxel_size, |vx| {
                    touched.insert(vx);
                });
            }
        }

        let mut voxels: Vec<VoxelIndex> = touched.into_iter().collect();
        voxels.sort_unstable();
        let mut updated = 0;
        for vx in voxels {
            let p_cam = pose.to_camera(&self.voxel_center(vx));
            let Some((u, v)) = intrinsics.project(&p_cam) else { continue };
            if mask.is_some_and(|m| !m.get(u, v)) {
                continue;
            }
            let Some(d) = depth.get(u, v) else { continue };
            let sdf = projective_sdf(d, p_cam.z);
            if sdf < -trunc {
                continue;
            }
            let sdf = sdf.min(trunc);
            let (b, l) = split_index(vx);
            let block = self.blocks.entry(b).or_default();
            let w_old = block.weight[l] as f64;
            let fused = (w_old * block.tsdf[l] as f64 + sdf) / (w_old + 1.0);
            block.tsdf[l] = (fused as f32).clamp(-trunc as f32, trunc as f32);
            block.weight[l] = (block.weight[l] + 1.0).min(w_max);
            updated += 1;
        }
        updated
    }

    /// Pixels whose back-projected depth lands on this grid's surface:
    /// the trilinear lookup succeeds and `|tsdf| <= band`.
    pub fn render_surface_mask(
        &self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        pose: &Pose,
        band: f64,
    ) -> Mask {
        let (w, h) = (intrinsics.width, intrinsics.height);
        if self.blocks.is_empty() {
            return Mask::empty(w, h);
        }
        Mask::from_fn(w, h, |u, v| {
            depth.get(u, v).is_some_and(|d| {
                let p = pose.to_world(&intrinsics.backproject(u, v, d));
                self.sample(&p).is_some_and(|s| s.abs() <= band)
            })
        })
    }

    /// Same as [`render_surface_mask`](Self::render_surface_mask) but returns
    /// `|tsdf|` per pixel (`None` where the pixel is not on the surface).
    pub fn render_surface_distance(
        &self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        pose: &Pose,
        band: f64,
    ) -> Vec<Option<f64>> {
        let (w, h) = (intrinsics.width as usize, intrinsics.height as usize);
        let mut out = vec![None; w * h];
        if self.blocks.is_empty() {
            return out;
        }
        for v in 0..h {
            for u in 0..w {
                if let Some(d) = depth.get(u, v) {
                    let p = pose.to_world(&intrinsics.backproject(u, v, d));
                    if let Some(s) = self.sample(&p) {
                        if s.abs() <= band {
                            out[v * w + u] = Some(s.abs());
                        }
                    }
                }
            }
        }
        out
    }

    /// Visits every allocated voxel as `(index, tsdf, weight)` in block-coordinate
    /// then local-index order.
    pub fn for_each_voxel(&self, mut f: impl FnMut(VoxelIndex, f32, f32)) {
        for (&b, blk) in &self.blocks {
            for l in 0..BLOCK_VOXELS {
                f(join_index(b, l), blk.tsdf[l], blk.weight[l]);
            }
        }
    }
}

/// Walks every voxel the segment `a → b` passes through (3D DDA).
pub fn traverse_voxels(a: &Vector3<f64>, b: &Vector3<f64>, voxel_size: f64, mut visit: impl FnMut(VoxelIndex)) {
    let start = a / voxel_size;
    let end = b / voxel_size;
    let dir = end - start;
    let mut idx = [start.x.floor() as i64, start.y.floor() as i64, start.z.floor() as i64];
    let last = [end.x.floor() as i64, end.y.floor() as i64, end.z.floor() as i64];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for axis in 0..3 {
        let (s, d) = (start[axis], dir[axis]);
        if d > 0.0 {
            step[axis] = 1;
            t_max[axis] = ((idx[axis] + 1) as f64 - s) / d;
            t_delta[axis] = 1.0 / d;
        } else if d < 0.0 {
            step[axis] = -1;
            t_max[axis] = (s - idx[axis] as f64) / -d;
            t_delta[axis] = -1.0 / d;
        }
    }
    let budget = (0..3).map(|i| (last[i] - idx[i]).abs()).sum::<i64>() + 1;
    for _ in 0..budget {
        visit(idx);
        if idx == last {
            return;
        }
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > 1.0 {
            return;
        }
        idx[axis] += step[axis];
        t_max[axis] += t_delta[axis];
    }
}
