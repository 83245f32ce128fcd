//! Experiment directory: flat CSV/JSON files plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Writer for one experiment directory; every file goes through it so the
/// manifest inventory is complete.
pub struct Output {
    dir: PathBuf,
    files: Mutex<Vec<FileEntry>>,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip decimal, in exponent form for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Empty field for a missing value.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Complex value as its (re, im) column pair.
pub fn cplx(z: Complex64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Mutex::new(Vec::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&self, name: &str, bytes: &[u8]) {
        let mut files = self.files.lock().expect("manifest writer poisoned");
        files.retain(|f| f.name != name);
        files.push(FileEntry { name: name.to_string(), bytes: bytes.len() as u64, sha256: hex_digest(bytes) });
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        self.record(name, bytes);
        Ok(())
    }

    pub fn csv<R, I>(&self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            let row: Vec<String> = row.into_iter().collect();
            if row.len() != header.len() {
                return Err(CliError::Output(format!("{name}: row of {} fields under a {}-column header", row.len(), header.len())));
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Records files written by other code (the binary eigenvector cache).
    pub fn adopt_tree(&self, sub: &str) -> Result<(), CliError> {
        let mut stack = vec![self.dir.join(sub)];
        let mut found = Vec::new();
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d)? {
                let p = e?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    found.push(p);
                }
            }
        }
        for p in found {
            let rel = p.strip_prefix(&self.dir).expect("adopted file outside the experiment").to_string_lossy().replace('\\', "/");
            self.record(&rel, &fs::read(&p)?);
        }
        Ok(())
    }

    /// Inventory sorted by name.
    pub fn inventory(&self) -> Vec<FileEntry> {
        let mut v = self.files.lock().expect("manifest writer poisoned").clone();
        v.sort_by(|a, b| a.name.cmp(&b.name));
        v
    }
}
