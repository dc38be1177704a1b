//! Report envelopes and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use fsforge_core::Tolerances;
use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = env!("FSFORGE_VERSION");

/// Every report carries the command, the version, the tolerances and the seed.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub tolerances: &'a Tolerances,
    pub seed: u64,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub error: &'a str,
    pub message: String,
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes)
        .and_then(|_| publish_permissions(tmp.as_file()))
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
    tmp.persist(&target)
        .map_err(|e| CliError::Io(format!("{}: {}", target.display(), e.error)))?;
    Ok(target)
}

#[cfg(unix)]
fn publish_permissions(file: &std::fs::File) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    file.set_permissions(std::fs::Permissions::from_mode(0o644))
}

#[cfg(not(unix))]
fn publish_permissions(_: &std::fs::File) -> std::io::Result<()> {
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}
