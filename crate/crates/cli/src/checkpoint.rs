//! Checkpoint files: a trainer snapshot plus the configuration that produced it.

use std::path::{Path, PathBuf};

use resetless::snapshot::Snapshot;

use crate::error::CliError;

pub const CONFIG_SECTION: &str = "meta.config";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const RESUME_FILE: &str = "resume.bin";
pub const FINAL_FILE: &str = "final.bin";
pub const DIAGNOSTIC_FILE: &str = "diagnostic.bin";

pub fn periodic_path(out: &Path, step: u64) -> PathBuf {
    out.join(CHECKPOINT_DIR).join(format!("step_{step:010}.bin"))
}

/// Writes through a temporary file so an interrupted save never leaves a
/// truncated checkpoint behind.
pub fn save(path: &Path, snap: &Snapshot, config_echo: &str) -> Result<(), CliError> {
    let mut snap = snap.clone();
    snap.put_text(CONFIG_SECTION, config_echo);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("bin.tmp");
    std::fs::write(&tmp, snap.to_bytes())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Snapshot, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Invalid(format!("cannot read checkpoint {}: {e}", path.display())))?;
    Snapshot::from_bytes(&bytes).map_err(|e| CliError::Invalid(format!("checkpoint {}: {e}", path.display())))
}

pub fn config_echo(snap: &Snapshot) -> Result<&str, CliError> {
    snap.text(CONFIG_SECTION).map_err(|_| CliError::Invalid("checkpoint carries no configuration".into()))
}
