//! Output tree writer. Every file goes through [`Outputs`], which records its
//! relative path and digest for the manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Shortest decimal that parses back to the same `f64`.
pub fn exact(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Three decimals, for the human-readable report variants.
pub fn rounded(v: f64) -> String {
    if v.is_finite() {
        let s = format!("{v:.3}");
        // Avoid "-0.000".
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    } else {
        String::new()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WrittenFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub struct Outputs {
    root: PathBuf,
    written: Vec<WrittenFile>,
}

impl Outputs {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::data(format!("creating {}", root.display()), e))?;
        Ok(Outputs {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Files written since the last call, in write order.
    pub fn take_written(&mut self) -> Vec<WrittenFile> {
        std::mem::take(&mut self.written)
    }

    pub fn write_bytes(&mut self, relative: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::data(format!("creating {}", parent.display()), e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::data(format!("writing {}", path.display()), e))?;
        self.written.push(WrittenFile {
            path: relative.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_csv<S: AsRef<str>>(&mut self, relative: &str, header: &[&str], rows: &[Vec<S>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::data(format!("encoding {relative}"), e);
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(row.iter().map(|c| c.as_ref())).map_err(fail)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::data(format!("encoding {relative}"), e.error()))?;
        self.write_bytes(relative, &bytes)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, relative: &str, value: &T) -> Result<(), CliError> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::data(format!("encoding {relative}"), e))?;
        bytes.push(b'\n');
        self.write_bytes(relative, &bytes)
    }
}

/// Lowercase ASCII slug for directory names: `Model 1` → `model_1`.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let trimmed = out.trim_matches('_');
    if trimmed.is_empty() {
        "model".into()
    } else {
        trimmed.into()
    }
}
