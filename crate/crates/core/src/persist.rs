//! Map directory format.
//!
//! ```text
//! <map dir>/
//!   index.json            schema_version, configs, categories, submap metadata + descriptors
//!   submap_<id>.bin       "PMSB", u32 version, u32 block_count,
//!                         then per block: i32 x3 coord, f32 x512 tsdf, f32 x512 weight
//! ```
//! All binary values are little-endian; blocks appear in ascending coordinate order.

use crate::category::CategoryTable;
use crate::descriptor::DynamicDescriptor;
use crate::fusion::{FusionConfig, PanopticMap, Submap, SubmapKind};
use crate::nms::NmsConfig;
use crate::tsdf::{Block, BlockCoord, TsdfGrid, BLOCK_VOXELS};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const MAP_SCHEMA_VERSION: u32 = 1;
const BLOCK_MAGIC: &[u8; 4] = b"PMSB";
const BLOCK_FORMAT_VERSION: u32 = 1;
const BLOCK_RECORD_BYTES: usize = 12 + BLOCK_VOXELS * 8;

#[derive(Debug, Error)]
pub enum MapIoError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed map index: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported map schema version {0}")]
    SchemaVersionUnsupported(u32),
    #[error("corrupt block file {path}: {reason}")]
    CorruptBlob { path: String, reason: String },
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    schema_version: u32,
    frames_processed: u64,
    next_instance_id: u32,
    freespace_id: Option<u32>,
    config: FusionConfig,
    nms: NmsConfig,
    categories: CategoryTable,
    stuff_index: BTreeMap<u32, u32>,
    submaps: Vec<SubmapMeta>,
}

#[derive(Serialize, Deserialize)]
struct SubmapMeta {
    id: u32,
    kind: SubmapKind,
    voxel_size: f64,
    truncation: f64,
    frames_observed: u32,
    last_observed: Option<u64>,
    descriptor: Option<DynamicDescriptor>,
    block_file: String,
    block_count: usize,
}

fn block_file_name(id: u32) -> String {
    format!("submap_{id:06}.bin")
}

fn encode_blocks(grid: &TsdfGrid) -> Vec<u8> {
    let blocks = grid.blocks();
    let mut out = Vec::with_capacity(12 + blocks.len() * BLOCK_RECORD_BYTES);
    out.extend_from_slice(BLOCK_MAGIC);
    out.extend_from_slice(&BLOCK_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (coord, block) in blocks {
        for c in coord {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for v in block.tsdf.iter().chain(&block.weight) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_blocks(bytes: &[u8], name: &str) -> Result<BTreeMap<BlockCoord, Block>, MapIoError> {
    let corrupt = |reason: String| MapIoError::CorruptBlob { path: name.into(), reason };
    if bytes.len() < 12 || &bytes[..4] != BLOCK_MAGIC {
        return Err(corrupt("missing header".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != BLOCK_FORMAT_VERSION {
        return Err(corrupt(format!("unknown block format version {version}")));
    }
    let count = u32_at(8) as usize;
    let expected = 12 + count * BLOCK_RECORD_BYTES;
    if bytes.len() != expected {
        return Err(corrupt(format!("{} bytes, expected {expected} for {count} blocks", bytes.len())));
    }
    let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let mut blocks = BTreeMap::new();
    for b in 0..count {
        let base = 12 + b * BLOCK_RECORD_BYTES;
        let coord = [u32_at(base) as i32, u32_at(base + 4) as i32, u32_at(base + 8) as i32];
        let data = base + 12;
        let tsdf = (0..BLOCK_VOXELS).map(|i| f32_at(data + 4 * i)).collect();
        let weight = (0..BLOCK_VOXELS).map(|i| f32_at(data + 4 * (BLOCK_VOXELS + i))).collect();
        if blocks.insert(coord, Block { tsdf, weight }).is_some() {
            return Err(corrupt(format!("duplicate block {coord:?}")));
        }
    }
    Ok(blocks)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MapIoError + '_ {
    move |source| MapIoError::Io { path: path.display().to_string(), source }
}

pub fn save_map(map: &PanopticMap, dir: &Path) -> Result<(), MapIoError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    // Stale block files from an earlier save would otherwise linger.
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("submap_") && name.ends_with(".bin") {
            std::fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }
    let mut metas = Vec::with_capacity(map.submaps.len());
    for s in map.submaps.values() {
        let name = block_file_name(s.id);
        let path = dir.join(&name);
        std::fs::write(&path, encode_blocks(&s.grid)).map_err(io_err(&path))?;
        metas.push(SubmapMeta {
            id: s.id,
            kind: s.kind,
            voxel_size: s.voxel_size(),
            truncation: s.truncation(),
            frames_observed: s.frames_observed,
            last_observed: s.last_observed,
            descriptor: s.descriptor.clone(),
            block_file: name,
            block_count: s.grid.blocks().len(),
        });
    }
    let index = IndexFile {
        schema_version: MAP_SCHEMA_VERSION,
        frames_processed: map.frames_processed,
        next_instance_id: map.next_instance_id,
        freespace_id: map.freespace_id,
        config: map.config,
        nms: map.nms,
        categories: map.categories.clone(),
        stuff_index: map.stuff_index.clone(),
        submaps: metas,
    };
    let path = dir.join("index.json");
    let mut text = serde_json::to_string_pretty(&index)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))
}

pub fn load_map(dir: &Path) -> Result<PanopticMap, MapIoError> {
    let path = dir.join("index.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let version: serde_json::Value = serde_json::from_str(&text)?;
    let v = version.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if v != MAP_SCHEMA_VERSION {
        return Err(MapIoError::SchemaVersionUnsupported(v));
    }
    let index: IndexFile = serde_json::from_value(version)?;
    let mut submaps = BTreeMap::new();
    for m in index.submaps {
        let path = dir.join(&m.block_file);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        let blocks = decode_blocks(&bytes, &m.block_file)?;
        if blocks.len() != m.block_count {
            return Err(MapIoError::CorruptBlob {
                path: m.block_file,
                reason: format!("{} blocks, index says {}", blocks.len(), m.block_count),
            });
        }
        let grid = TsdfGrid::from_blocks(m.voxel_size, m.truncation, blocks);
        submaps.insert(
            m.id,
            Submap {
                id: m.id,
                kind: m.kind,
                grid,
                descriptor: m.descriptor,
                frames_observed: m.frames_observed,
                last_observed: m.last_observed,
            },
        );
    }
    Ok(PanopticMap {
        submaps,
        next_instance_id: index.next_instance_id,
        stuff_index: index.stuff_index,
        freespace_id: index.freespace_id,
        config: index.config,
        nms: index.nms,
        categories: index.categories,
        frames_processed: index.frames_processed,
    })
}
