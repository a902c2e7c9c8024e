//! `query`: rank submaps against a text or an embedding.

use crate::{write_line, CliError, CliResult};
use clap::{Args, ValueEnum};
use promptmap::persist::load_map;
use promptmap::query::{query, QueryError, QueryMode};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Embedding,
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    /// Map directory written by `fuse`.
    #[arg(long)]
    pub map: PathBuf,
    /// Query text; normalized before matching.
    #[arg(long)]
    pub text: String,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Maximum number of results.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Query embedding: a JSON array of numbers or raw little-endian f32.
    #[arg(long)]
    pub embedding_file: Option<PathBuf>,
}

pub fn read_embedding(path: &Path) -> CliResult<Vec<f32>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if let Ok(v) = serde_json::from_slice::<Vec<f32>>(&bytes) {
        return Ok(v);
    }
    if bytes.is_empty() || bytes.len() % 4 != 0 {
        return Err(CliError::Usage(format!(
            "{}: neither a JSON array nor little-endian f32 ({} bytes)",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn cmd_query(args: &QueryArgs, out: &mut dyn Write) -> CliResult<()> {
    let embedding = match (args.mode, &args.embedding_file) {
        (Mode::Embedding, None) => return Err(CliError::Usage("--mode embedding requires --embedding-file".into())),
        (Mode::Embedding, Some(p)) => Some(read_embedding(p)?),
        (Mode::Exact, _) => None,
    };
    let map = load_map(&args.map).map_err(|e| CliError::Usage(format!("cannot load map {}: {e}", args.map.display())))?;
    let mode = match args.mode {
        Mode::Exact => QueryMode::Exact,
        Mode::Embedding => QueryMode::Embedding,
    };
    let hits = query(&map, &args.text, embedding.as_deref(), mode, args.k).map_err(|e| match e {
        QueryError::DimensionMismatch { .. } | QueryError::EmbeddingRequired => CliError::Usage(e.to_string()),
    })?;
    for h in hits {
        write_line(out, &serde_json::to_string(&h).expect("serialisable"))?;
    }
    Ok(())
}
