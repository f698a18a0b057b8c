//! Front end for the `emth` binary: scenario pipelines, artifact writing and
//! exit-code mapping.

pub mod pipeline;
pub mod scenario;

use std::fmt;
use std::path::{Path, PathBuf};

use emth_core::EmthError;
use sha2::{Digest, Sha256};

/// Environment variable naming the default output directory.
pub const OUT_DIR_VAR: &str = "EMTH_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    VerificationFailure = 1,
    Configuration = 2,
    NumericalAbort = 3,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerics(EmthError),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(field: &str, message: impl fmt::Display) -> Self {
        CliError::Config(format!("{field}: {message}"))
    }

    pub fn exit(&self) -> Exit {
        match self {
            CliError::Config(_) | CliError::Io { .. } => Exit::Configuration,
            CliError::Numerics(e) if e.is_configuration() => Exit::Configuration,
            CliError::Numerics(_) => Exit::NumericalAbort,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerics(e) => write!(f, "{}: {e}", e.name()),
            CliError::Io { path, source } => write!(f, "cannot write {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<EmthError> for CliError {
    fn from(e: EmthError) -> Self {
        CliError::Numerics(e)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Relative paths are placed under `$EMTH_OUT_DIR` when it is set.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Default directory for artifacts when none is given.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("emth-out"))
}

/// Write `contents` and return its SHA-256.
pub fn write_artifact(path: &Path, contents: &str) -> Result<String, CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)?;
    Ok(sha256_hex(contents.as_bytes()))
}
