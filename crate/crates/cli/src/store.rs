//! File helpers: content hashes, atomic writes and cavity loading.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use wpnn_core::cavity::{synthesize_cavity, WidebandScattering};
use wpnn_core::experiment::CavitySource;
use wpnn_core::interchange::ScatteringFile;

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the cavity a source resolves to. Synthesized cavities are
/// identified by their spec, files by their bytes.
pub fn cavity_hash(source: &CavitySource) -> CliResult<String> {
    match source {
        CavitySource::Synth(spec) => Ok(sha256_hex(format!("synth\n{}", serde_json::to_string(spec)?).as_bytes())),
        CavitySource::File(path) => Ok(sha256_hex(&read(path)?)),
    }
}

pub fn load_cavity(source: &CavitySource) -> CliResult<Arc<WidebandScattering>> {
    let ws = match source {
        CavitySource::Synth(spec) => synthesize_cavity(spec)?,
        CavitySource::File(path) => ScatteringFile::read(fs::File::open(path).map_err(|e| io_context(path, e))?)?.to_wideband()?,
    };
    Ok(Arc::new(ws))
}

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| io_context(path, e))
}

pub fn read_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_context(path, e))
}

fn io_context(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| io_context(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_context(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> CliResult<()> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}
