//! `eval geom` and `eval panoptic`: score a map against a ground-truth
//! sidecar written by `synth`.

use crate::{write_json_file, write_line, CliError, CliResult};
use clap::{Args, Subcommand};
use promptmap::category::CategoryKind;
use promptmap::dataset::load_manifest;
use promptmap::eval::panoptic::{GtRegion, ScoredRegion, DEFAULT_MAP_THRESHOLDS};
use promptmap::eval::{f1_detail, geometric_metrics, mean_ap, GeometricReport, PanopticCounts, PanopticReport, Segment};
use promptmap::extract::{extract_points, Band};
use promptmap::fusion::{grid_in_frustum, PanopticMap, SubmapKind};
use promptmap::mask::Mask;
use promptmap::persist::load_map;
use promptmap_synth::{GroundTruth, SynthError};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Subcommand)]
pub enum EvalCommand {
    /// Reconstruction accuracy, completeness, Chamfer, Hausdorff, completion.
    Geom(GeomArgs),
    /// Panoptic quality and mask mAP over the sidecar's frames.
    Panoptic(PanopticArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GeomArgs {
    /// Map directory written by `fuse`.
    #[arg(long)]
    pub map: PathBuf,
    /// Ground-truth sidecar directory.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Report file.
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    /// Completion and F1 distance threshold, meters.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    /// Surface extraction band, in voxels of each submap.
    #[arg(long, default_value_t = 1.0)]
    pub eval_band: f64,
    /// Also print a CSV header and row to stdout.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PanopticArgs {
    /// Map directory written by `fuse`.
    #[arg(long)]
    pub map: PathBuf,
    /// Manifest of the dataset the map was fused from (depth and poses).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Ground-truth sidecar directory.
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

fn load_inputs(map: &Path, sidecar: &Path) -> CliResult<(PanopticMap, GroundTruth)> {
    let gt = GroundTruth::load(sidecar).map_err(|e| match e {
        SynthError::Io { .. } => CliError::Usage(format!("ground-truth sidecar {}: {e}", sidecar.display())),
        other => CliError::Runtime(other.to_string()),
    })?;
    let map = load_map(map).map_err(|e| CliError::Usage(format!("cannot load map {}: {e}", map.display())))?;
    Ok((map, gt))
}

pub fn cmd_eval(cmd: &EvalCommand, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        EvalCommand::Geom(a) => {
            let report = eval_geom(a)?;
            write_json_file(&a.out, &report)?;
            if a.csv {
                write_line(out, GeometricReport::CSV_HEADER)?;
                write_line(out, &report.csv_row())
            } else {
                write_line(out, &serde_json::to_string(&report).expect("serialisable"))
            }
        }
        EvalCommand::Panoptic(a) => {
            let report = eval_panoptic(a)?;
            write_json_file(&a.out, &report)?;
            write_line(out, &serde_json::to_string(&report).expect("serialisable"))
        }
    }
}

pub fn eval_geom(a: &GeomArgs) -> CliResult<GeometricReport> {
    if !(a.eval_band > 0.0 && a.threshold > 0.0) {
        return Err(CliError::Usage("--eval-band and --threshold must be positive".into()));
    }
    let (map, gt) = load_inputs(&a.map, &a.ground_truth)?;
    let cloud = extract_points(&map, Band::VoxelFactor(a.eval_band));
    let mut report =
        geometric_metrics(&cloud.points, &gt.points, a.threshold).map_err(|e| CliError::Runtime(e.to_string()))?;
    let background: BTreeSet<u32> =
        map.categories().categories().iter().filter(|c| c.kind == CategoryKind::Stuff).map(|c| c.id).collect();
    match f1_detail(&cloud.points, &cloud.category_ids, &gt.points, &gt.point_categories, &background, a.threshold) {
        Ok(f) => report.f1_detail = Some(f),
        Err(e) => log::warn!("f1 not reported: {e}"),
    }
    Ok(report)
}

/// Exclusive per-pixel prediction: each pixel goes to the submap whose
/// surface passes closest to its back-projected depth (lowest id on ties).
fn predicted_segments(map: &PanopticMap, frame: &promptmap::dataset::FrameRecord) -> Vec<(u32, Segment)> {
    let k = &frame.intrinsics;
    let n = k.pixel_count();
    let mut best: Vec<Option<(f64, u32)>> = vec![None; n];
    for s in map.submaps().values() {
        if s.kind == SubmapKind::Freespace || !grid_in_frustum(&s.grid, k, &frame.pose) {
            continue;
        }
        let band = map.config().surface_band * s.voxel_size();
        let dist = s.grid.render_surface_distance(&frame.depth, k, &frame.pose, band);
        for (slot, d) in best.iter_mut().zip(dist) {
            if let Some(d) = d {
                if slot.is_none_or(|(b, _)| d < b) {
                    *slot = Some((d, s.id));
                }
            }
        }
    }
    let mut bits: BTreeMap<u32, Vec<bool>> = BTreeMap::new();
    for (i, slot) in best.iter().enumerate() {
        if let Some((_, id)) = slot {
            bits.entry(*id).or_insert_with(|| vec![false; n])[i] = true;
        }
    }
    bits.into_iter()
        .filter_map(|(id, b)| {
            let category = map.submap(id)?.category()?;
            let mask = Mask::from_bits(k.width, k.height, b).expect("frame-sized");
            Some((id, Segment { mask, category }))
        })
        .collect()
}

pub fn eval_panoptic(a: &PanopticArgs) -> CliResult<PanopticReport> {
    let (map, gt) = load_inputs(&a.map, &a.ground_truth)?;
    let dataset = load_manifest(&a.manifest)
        .map_err(|e| CliError::Usage(format!("cannot load manifest {}: {e}", a.manifest.display())))?;
    let position: BTreeMap<u32, usize> =
        dataset.manifest().frames.iter().enumerate().map(|(i, f)| (f.index, i)).collect();

    let mut counts = PanopticCounts::default();
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for (image, gt_frame) in gt.masks.frames.iter().enumerate() {
        let &pos = position
            .get(&gt_frame.index)
            .ok_or_else(|| CliError::Usage(format!("ground truth frame {} is not in the manifest", gt_frame.index)))?;
        let frame = dataset.load_frame(pos).map_err(|e| CliError::Runtime(e.to_string()))?;
        let truth: Vec<Segment> = gt
            .masks
            .decode(gt_frame)
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .into_iter()
            .map(|(_, category, mask)| Segment { mask, category })
            .collect();
        let predicted = predicted_segments(&map, &frame);
        let segments: Vec<Segment> = predicted.iter().map(|(_, s)| s.clone()).collect();
        counts.add_image(&segments, &truth).map_err(|e| CliError::Runtime(e.to_string()))?;
        for (id, s) in predicted {
            let confidence = map.submap(id).map_or(0.0, |s| s.frames_observed as f64);
            preds.push(ScoredRegion { region: s.mask, category: s.category, confidence, image });
        }
        gts.extend(truth.into_iter().map(|s| GtRegion { region: s.mask, category: s.category, image }));
    }
    let mut report = counts.finish();
    report.map_at = mean_ap(&preds, &gts, &DEFAULT_MAP_THRESHOLDS);
    Ok(report)
}
