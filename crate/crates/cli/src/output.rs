use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

/// Environment variable naming the directory used when `--out` is absent.
pub const OUT_DIR_ENV: &str = "ADAMLAB_OUT_DIR";

/// Where a CSV goes: an explicit path, `$ADAMLAB_OUT_DIR/<default_name>`, or stdout.
pub fn resolve(out: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    if let Some(p) = out {
        return Some(p.to_path_buf());
    }
    std::env::var_os(OUT_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|d| PathBuf::from(d).join(default_name))
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Builds the CSV in memory, then sends it to `dest` or stdout.
pub fn emit(
    dest: Option<&Path>,
    build: impl FnOnce(&mut Vec<u8>) -> Result<(), adamlab::ExportError>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    build(&mut buf)?;
    match dest {
        Some(p) => write_atomic(p, &buf),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&buf)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// `out.csv` + `adam` -> `out-adam.csv`.
pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    path.with_file_name(name)
}
