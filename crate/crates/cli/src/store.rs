//! Run-directory IO. Every file goes through [`RunDir`] so its checksum lands
//! in the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub files: Vec<FileEntry>,
    /// Stage-specific facts such as per-temperature seeds.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
    /// Wall-clock seconds per stage; the only non-reproducible field.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn files(&self) -> impl Iterator<Item = &FileEntry> {
        self.stages.values().flat_map(|s| s.files.iter())
    }
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|source| CliError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(Self { root })
    }

    /// Opens an existing run directory without creating it.
    pub fn open(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(CliError::missing(root, "run directory does not exist"));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    pub fn read_bytes(&self, rel: &str, hint: &str) -> CliResult<Vec<u8>> {
        let path = self.path(rel);
        if !path.is_file() {
            return Err(CliError::missing(path, hint));
        }
        std::fs::read(&path).map_err(|source| CliError::Io { path, source })
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str, hint: &str) -> CliResult<T> {
        let bytes = self.read_bytes(rel, hint)?;
        serde_json::from_slice(&bytes).map_err(|source| CliError::Parse {
            path: self.path(rel),
            source,
        })
    }

    pub fn read_csv<T: DeserializeOwned>(&self, rel: &str, hint: &str) -> CliResult<Vec<T>> {
        let bytes = self.read_bytes(rel, hint)?;
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
    }

    pub fn manifest(&self) -> CliResult<RunManifest> {
        if !self.exists(MANIFEST) {
            return Ok(RunManifest::default());
        }
        self.read_json(MANIFEST, "")
    }
}

/// Collects the files of one stage, then merges them into the manifest.
pub struct Stage<'a> {
    dir: &'a RunDir,
    name: String,
    files: Vec<FileEntry>,
}

impl<'a> Stage<'a> {
    pub fn new(dir: &'a RunDir, name: &str) -> Self {
        Self {
            dir,
            name: name.into(),
            files: Vec::new(),
        }
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|source| CliError::Parse {
            path: self.dir.path(rel),
            source,
        })?;
        text.push(b'\n');
        self.write_bytes(rel, &text)
    }

    pub fn write_csv<R: Serialize>(&mut self, rel: &str, rows: impl IntoIterator<Item = R>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io {
            path: self.dir.path(rel),
            source: e.into_error(),
        })?;
        self.write_bytes(rel, &bytes)
    }

    /// Writes a header plus raw records, for tables with variable columns.
    pub fn write_records(&mut self, rel: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io {
            path: self.dir.path(rel),
            source: e.into_error(),
        })?;
        self.write_bytes(rel, &bytes)
    }

    pub fn finish(mut self, config_hash: &str, details: serde_json::Value, seconds: f64) -> CliResult<RunManifest> {
        let mut m = self.dir.manifest()?;
        m.tool = env!("CARGO_PKG_NAME").into();
        m.version = env!("CARGO_PKG_VERSION").into();
        m.config_hash = config_hash.into();
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        m.stages.insert(
            self.name.clone(),
            StageRecord {
                files: std::mem::take(&mut self.files),
                details,
            },
        );
        m.timings.insert(self.name.clone(), seconds);
        let mut text = serde_json::to_vec_pretty(&m).expect("manifest serializes");
        text.push(b'\n');
        let path = self.dir.path(MANIFEST);
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_records_checksums() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::new(tmp.path()).unwrap();
        let mut st = Stage::new(&dir, "demo");
        st.write_bytes("a/b.txt", b"abc").unwrap();
        st.write_csv("t.csv", [(1, 2.5)]).unwrap();
        let m = st.finish("h", serde_json::Value::Null, 0.5).unwrap();
        let files: Vec<_> = m.files().collect();
        assert_eq!(files.len(), 2);
        assert_eq!(
            files[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(dir.manifest().unwrap(), m);
    }

    #[test]
    fn missing_file_names_path() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::new(tmp.path()).unwrap();
        let err = dir.read_json::<serde_json::Value>("sweep/series.json", "run sweep first").unwrap_err();
        assert!(err.to_string().contains("sweep/series.json"));
        assert_eq!(err.exit_code(), crate::error::exit::MISSING);
    }
}
