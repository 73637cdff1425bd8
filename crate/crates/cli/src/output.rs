//! CSV tables and the JSON run manifest.

use crate::config::RunConfig;
use anyhow::Context;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    package: &'static str,
    version: &'static str,
    parallel: bool,
    /// No experiment draws random numbers; kept for schema stability.
    seed: Option<u64>,
    files: Vec<String>,
    config: &'a RunConfig,
}

/// Writes `manifest.json` next to the experiment's CSV files.
pub fn write_manifest(dir: &Path, command: &str, config: &RunConfig, files: &[PathBuf]) -> anyhow::Result<PathBuf> {
    let m = Manifest {
        command,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        parallel: spherepol::par::ExecPolicy::default().is_parallel(),
        seed: None,
        files: files
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
        config,
    };
    let path = dir.join(format!("{command}_manifest.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&m)?)?;
    Ok(path)
}
