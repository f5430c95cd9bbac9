//! Data-center snapshots: the full generated state (config, machines, VMs,
//! bandwidth table) as one JSON document, versioned so stale files fail
//! loudly instead of deserializing into nonsense.

use std::path::Path;

use dvmc_core::workload::DataCenter;
use dvmc_core::Real;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// Bump when the on-disk layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    schema: u32,
    data_center: DataCenter<Real>,
}

/// Serializes the state to `path`. Output is pretty-printed JSON with a
/// trailing newline; identical states produce byte-identical files.
pub fn save(dc: &DataCenter<Real>, path: &Path) -> Result<()> {
    let file = SnapshotFile { schema: SCHEMA_VERSION, data_center: dc.clone() };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// Reads a snapshot back, checking the schema version and the integrity of
/// the loaded state (placements within capacity, complete bandwidth table).
pub fn load(path: &Path) -> Result<DataCenter<Real>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let file: SnapshotFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })?;
    if file.schema != SCHEMA_VERSION {
        return Err(CliError::SnapshotSchema { expected: SCHEMA_VERSION, found: file.schema });
    }
    file.data_center.validate()?;
    Ok(file.data_center)
}
