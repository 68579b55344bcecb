//! Persisting a run: the CSV table and its `<table>.meta.json` sidecar.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::record::{to_csv, COLUMNS};
use crate::runner::RunOutput;

pub fn meta_path(table: &Path) -> PathBuf {
    let mut name = table.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn metadata(cfg: &RunConfig, out: &RunOutput, workers: usize) -> serde_json::Value {
    let wall: serde_json::Map<String, serde_json::Value> =
        out.wall_times.iter().map(|(name, secs)| (name.clone(), json!(secs))).collect();
    json!({
        "config_hash": out.config_hash,
        "seed": cfg.seed,
        "tool": env!("CARGO_PKG_NAME"),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "core_version": gausstest_core::VERSION,
        "workers": workers,
        "columns": COLUMNS,
        "rows": out.records.len(),
        "failed_rows": out.failed_rows(),
        "wall_time_seconds": wall,
        "total_wall_time_seconds": out.wall_times.iter().map(|(_, s)| s).sum::<f64>(),
        "config": serde_json::from_str::<serde_json::Value>(&cfg.canonical_json()).expect("canonical JSON parses"),
    })
}

/// Writes the table and the sidecar next to it.
pub fn write(path: &Path, cfg: &RunConfig, out: &RunOutput, workers: usize) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, to_csv(&out.records)).map_err(|e| CliError::io(path, e))?;
    let meta = serde_json::to_string_pretty(&metadata(cfg, out, workers)).expect("metadata serializes");
    let meta_file = meta_path(path);
    std::fs::write(&meta_file, meta + "\n").map_err(|e| CliError::io(&meta_file, e))
}
