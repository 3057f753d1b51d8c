//! On-disk formats: dataset archives, model checkpoints and reports.
//! Every file carries an explicit format version and is written atomically.

pub mod archive;
pub mod checkpoint;
pub mod report;

pub use archive::{ArchiveMetadata, DatasetArchive, ARCHIVE_VERSION};
pub use checkpoint::{Checkpoint, CheckpointKind, ConfigEcho, LoadedClassifier, CHECKPOINT_VERSION};
pub use report::{emit_comparison, emit_report, emit_scae_loss, emit_sweep, emit_train_loss};

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub(crate) fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn f32_from_bytes(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
}
