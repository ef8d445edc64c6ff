//! Library half of the `fdastream` command: everything the subcommands do
//! besides argument parsing.

pub mod bench;
pub mod error;
pub mod msplot;
pub mod stream;
pub mod svg;

use std::path::Path;

use fdastream_core::engine::{Engine, EngineConfig};
use fdastream_core::ingestion::parse_wide_csv;
use fdastream_core::{MsSnapshot, Result};

/// Batch fit and classify a wide CSV panel. The service's `GET /msplot` runs
/// the same path on the same input.
pub fn fit_file(path: &Path, config: EngineConfig) -> Result<MsSnapshot> {
    let panel = parse_wide_csv(path)?;
    let engine = Engine::with_panel(panel, config)?;
    Ok(engine.snapshot().expect("fitted engine has a snapshot"))
}
