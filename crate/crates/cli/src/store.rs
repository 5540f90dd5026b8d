//! Run directory layout and artifact writers.
//!
//! Every command writes into one directory: a manifest tying the artifacts
//! to the exact configuration and seed, JSON for records, CSV for tabular
//! figure data, and raw little-endian binary for large grids. Nothing here
//! embeds a timestamp, so re-running an identical config reproduces every
//! byte.

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub struct ResultStore {
    dir: PathBuf,
}

/// Identifies a run: what was executed, on which config, and how it was
/// seeded; `code_version` is the crate version that produced it.
#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    code_version: &'a str,
    seed: Option<u64>,
}

impl ResultStore {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.path(name), contents)
            .map_err(|e| CliError::Validation(format!("cannot write {name}: {e}")))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Validation(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_manifest(
        &self,
        command: &str,
        config_text: &str,
        seed: Option<u64>,
    ) -> Result<(), CliError> {
        let mut hasher = Sha256::new();
        hasher.update(config_text.as_bytes());
        let manifest = Manifest {
            command,
            config_sha256: format!("{:x}", hasher.finalize()),
            code_version: env!("CARGO_PKG_VERSION"),
            seed,
        };
        self.write_json("manifest.json", &manifest)
    }

    /// Raw grid dump: `M` (u64), spacing, center (f64), then row-major
    /// complex pairs, all little-endian; metadata goes to `<name>.json`.
    pub fn write_grid_binary<M: Serialize>(
        &self,
        name: &str,
        spacing: f64,
        center: f64,
        values: &[Complex64],
        meta: &M,
    ) -> Result<(), CliError> {
        let m = (values.len() as f64).sqrt().round() as u64;
        if (m * m) as usize != values.len() {
            return Err(CliError::Validation(format!(
                "grid dump {name} is not square: {} values",
                values.len()
            )));
        }
        let file = std::fs::File::create(self.path(name))
            .map_err(|e| CliError::Validation(format!("cannot create {name}: {e}")))?;
        let mut w = std::io::BufWriter::new(file);
        let mut put = |bytes: &[u8]| {
            w.write_all(bytes)
                .map_err(|e| CliError::Validation(format!("cannot write {name}: {e}")))
        };
        put(&m.to_le_bytes())?;
        put(&spacing.to_le_bytes())?;
        put(&center.to_le_bytes())?;
        for z in values {
            put(&z.re.to_le_bytes())?;
            put(&z.im.to_le_bytes())?;
        }
        w.flush()
            .map_err(|e| CliError::Validation(format!("cannot write {name}: {e}")))?;
        self.write_json(&format!("{name}.json"), meta)
    }
}
