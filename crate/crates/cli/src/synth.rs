//! `synth`: write a synthetic corpus described by a JSON spec.

use crate::{write_line, CliError, CliResult};
use clap::Args;
use promptmap_synth::{CorpusSpec, SynthError};
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON corpus spec (seed, scene, trajectory, noise, intrinsics).
    pub spec: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Usage(format!("cannot read spec {}: {e}", args.spec.display())))?;
    let to_cli = |e: SynthError| match e {
        SynthError::SpecInvalid(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    };
    let spec = CorpusSpec::from_json(&text).map_err(to_cli)?;
    let summary = spec.build(&args.out).map_err(to_cli)?;
    log::info!("wrote {} frames to {}", summary.frames, args.out.display());
    let line = json!({
        "manifest": summary.manifest,
        "frames": summary.frames,
        "blurry_frames": summary.blurry_frames,
        "detections": summary.detections,
        "ground_truth_points": summary.ground_truth_points,
    });
    write_line(out, &line.to_string())
}
