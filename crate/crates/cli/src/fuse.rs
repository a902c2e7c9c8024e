//! `fuse`: stream a dataset through the fusion engine and save the map.

use crate::{write_line, CliError, CliResult};
use clap::Args;
use promptmap::dataset::{load_manifest, Dataset};
use promptmap::fusion::{FusionConfig, PanopticMap};
use promptmap::nms::NmsConfig;
use promptmap::persist::save_map;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

/// Fusion and NMS overrides; each flag is named after its config field.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    /// Minimum mask IoU for a detection to fuse into an existing submap.
    #[arg(long)]
    pub xi_iou: Option<f64>,
    /// Cap on the accumulated TSDF weight per voxel.
    #[arg(long)]
    pub w_max: Option<f32>,
    /// Surface band for mask rendering, in voxels.
    #[arg(long)]
    pub surface_band: Option<f64>,
    /// TSDF truncation distance, in voxels.
    #[arg(long)]
    pub truncation_factor: Option<f64>,
    /// Also integrate a coarse free-space submap.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub enable_freespace: Option<bool>,
    /// Only associate with submaps of the same current category.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub require_category_match: Option<bool>,
    /// Per-corner pixel distance under which two boxes are duplicates.
    #[arg(long)]
    pub tau_coord: Option<f64>,
    /// IoU threshold of the per-class NMS baseline.
    #[arg(long)]
    pub baseline_iou: Option<f64>,
    /// Rank caption-derived detections ahead of equally confident ones.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub prefer_caption: Option<bool>,
}

impl ConfigOverrides {
    fn fusion(&self) -> Map<String, Value> {
        let mut m = Map::new();
        put(&mut m, "xi_iou", self.xi_iou);
        put(&mut m, "w_max", self.w_max);
        put(&mut m, "surface_band", self.surface_band);
        put(&mut m, "truncation_factor", self.truncation_factor);
        put(&mut m, "enable_freespace", self.enable_freespace);
        put(&mut m, "require_category_match", self.require_category_match);
        m
    }

    fn nms(&self) -> Map<String, Value> {
        let mut m = Map::new();
        put(&mut m, "tau_coord", self.tau_coord);
        put(&mut m, "baseline_iou", self.baseline_iou);
        put(&mut m, "prefer_caption", self.prefer_caption);
        m
    }
}

fn put<T: Into<Value>>(m: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        m.insert(key.into(), v.into());
    }
}

#[derive(Debug, Clone, Args)]
pub struct FuseArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Map directory to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Skip frames flagged blurry in the manifest.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value = "false")]
    pub filter_blurry: bool,
    #[command(flatten)]
    pub config: ConfigOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuseSummary {
    pub frames: usize,
    pub skipped_blurry: usize,
    pub submaps: usize,
    pub seconds: f64,
    pub fps: f64,
}

/// Built-in values, overlaid by the manifest's defaults, overlaid by the
/// command-line flags. Unknown manifest keys are configuration errors.
pub fn layer_config<T: Serialize + DeserializeOwned>(
    builtin: &T,
    manifest: Option<&Value>,
    cli: Map<String, Value>,
    what: &str,
) -> CliResult<T> {
    let mut merged = match serde_json::to_value(builtin) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("configs serialise to objects"),
    };
    match manifest {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => merged.extend(m.clone()),
        Some(other) => return Err(CliError::Usage(format!("manifest {what} defaults must be an object, found {other}"))),
    }
    merged.extend(cli);
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid {what} config: {e}")))
}

pub fn resolve_configs(dataset: &Dataset, overrides: &ConfigOverrides) -> CliResult<(FusionConfig, NmsConfig)> {
    let defaults = dataset.manifest().config.clone().unwrap_or_default();
    let fusion = layer_config(&FusionConfig::default(), defaults.fusion.as_ref(), overrides.fusion(), "fusion")?;
    let nms = layer_config(&NmsConfig::default(), defaults.nms.as_ref(), overrides.nms(), "nms")?;
    fusion.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    nms.validate().map_err(|e| CliError::Usage(format!("invalid nms config: {e}")))?;
    Ok((fusion, nms))
}

pub fn cmd_fuse(args: &FuseArgs, out: &mut dyn Write) -> CliResult<FuseSummary> {
    let dataset = load_manifest(&args.manifest)
        .map_err(|e| CliError::Usage(format!("cannot load manifest {}: {e}", args.manifest.display())))?;
    let (fusion, nms) = resolve_configs(&dataset, &args.config)?;
    log::info!("fusion config {fusion:?}, nms config {nms:?}");
    let mut map =
        PanopticMap::new(dataset.categories().clone(), fusion, nms).map_err(|e| CliError::Usage(e.to_string()))?;

    let start = Instant::now();
    let (mut frames, mut skipped) = (0, 0);
    for i in 0..dataset.frame_count() {
        if args.filter_blurry && dataset.is_blurry(i) == Some(true) {
            skipped += 1;
            continue;
        }
        let frame = dataset.load_frame(i).map_err(|e| CliError::Runtime(format!("frame {i}: {e}")))?;
        let report = map.process_frame(&frame).map_err(|e| CliError::Runtime(e.to_string()))?;
        log::debug!("frame {}: {} detections, {} after nms, {} new submaps", frame.index, report.detections, report.after_nms, report.created());
        frames += 1;
    }
    let seconds = start.elapsed().as_secs_f64();
    save_map(&map, &args.out).map_err(|e| CliError::Runtime(format!("writing map: {e}")))?;

    let summary = FuseSummary {
        frames,
        skipped_blurry: skipped,
        submaps: map.submaps().len(),
        seconds,
        fps: if seconds > 0.0 { frames as f64 / seconds } else { 0.0 },
    };
    log::info!("fused {frames} frames ({skipped} blurry skipped) into {} submaps at {:.1} FPS", summary.submaps, summary.fps);
    write_line(out, &serde_json::to_string(&summary).expect("serialisable"))?;
    Ok(summary)
}
