//! Tab-separated tables with a provenance comment line and a JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Shortest round-trip form; missing values print as `NA`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), num)
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self, stamp: &str) -> String {
        let mut out = format!("# {stamp}\n{}\n", self.columns.join("\t"));
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    rows: Option<usize>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: &'a str,
    seed: Option<u64>,
    config: &'a serde_json::Value,
    files: Vec<FileEntry>,
}

/// Collects the files of one command and writes the sidecar last.
pub struct Writer {
    dir: PathBuf,
    prefix: String,
    command: String,
    config_sha256: String,
    seed: Option<u64>,
    config: serde_json::Value,
    files: Vec<FileEntry>,
}

impl Writer {
    pub fn new(
        dir: &Path,
        prefix: &str,
        command: &str,
        raw_config: &str,
        config: &impl Serialize,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            command: command.to_string(),
            config_sha256: sha256_hex(raw_config.as_bytes()),
            seed,
            config: serde_json::to_value(config).map_err(CliError::runtime)?,
            files: Vec::new(),
        })
    }

    fn stamp(&self) -> String {
        let seed = self.seed.map_or_else(String::new, |s| format!(" seed={s}"));
        format!("cda {VERSION} command={} config_sha256={}{seed}", self.command, self.config_sha256)
    }

    fn put(&mut self, name: &str, body: &str, rows: Option<usize>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(format!("{}.{name}", self.prefix));
        fs::write(&path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        self.files.push(FileEntry { path: file, sha256: sha256_hex(body.as_bytes()), rows });
        Ok(path)
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        let body = table.render(&self.stamp());
        self.put(&format!("{name}.tsv"), &body, Some(table.rows.len()))
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
        body.push('\n');
        self.put(&format!("{name}.json"), &body, None)
    }

    pub fn finish(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written: Vec<PathBuf> = self.files.iter().map(|f| self.dir.join(&f.path)).collect();
        let sidecar = Sidecar {
            tool: "cda",
            version: VERSION,
            command: &self.command,
            config_sha256: &self.config_sha256,
            seed: self.seed,
            config: &self.config,
            files: self.files,
        };
        let mut body = serde_json::to_string_pretty(&sidecar).map_err(CliError::runtime)?;
        body.push('\n');
        let path = self.dir.join(format!("{}.{}.meta.json", self.prefix, self.command));
        fs::write(&path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
        Ok(written)
    }
}
