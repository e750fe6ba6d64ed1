use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub role: String,
    /// Relative to the output directory for outputs; file name for inputs.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to repeat a command: the resolved config, seed, tool
/// version and the hashes of what was read and written. No timestamps, so
/// repeated runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads a whole input file, recording its hash.
pub(crate) fn read_input(path: &Path, role: &str, inputs: &mut Vec<FileRecord>) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    inputs.push(FileRecord {
        role: role.to_string(),
        path: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    });
    Ok(bytes)
}

/// Output directory that records every file written into it.
pub(crate) struct OutputDir {
    dir: PathBuf,
    written: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(OutputDir {
            dir,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, role: &str, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(FileRecord {
            role: role.to_string(),
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_with(
        &mut self,
        role: &str,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(role, name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, role: &str, name: &str, value: &T) -> Result<PathBuf> {
        self.write_with(role, name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    /// Writes `manifest_<command>.json` and returns the list of written paths.
    pub fn finish(mut self, command: &str, config: &RunConfig, inputs: Vec<FileRecord>) -> Result<super::Outcome> {
        let manifest = Manifest {
            command: command.to_string(),
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed: config.model.seed,
            config: config.for_manifest(),
            inputs,
            outputs: self.written.clone(),
        };
        let name = format!("manifest_{command}.json");
        let mut outputs: Vec<PathBuf> = self.written.iter().map(|r| self.dir.join(&r.path)).collect();
        let path = self.write_json("manifest", &name, &manifest)?;
        outputs.push(path.clone());
        Ok(super::Outcome {
            command: command.to_string(),
            manifest: path,
            outputs,
        })
    }
}
