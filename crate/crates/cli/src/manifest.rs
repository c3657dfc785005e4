//! Per-run manifest: command, resolved config, seed and content hashes of
//! every input.
//!
//! Files are hashed git-style, `sha256("blob <len>\0" ++ bytes)`. A
//! directory hashes to `sha256` of its sorted `<relative path>\0<hash>\n`
//! lines. The manifest carries no timestamps, so identical runs produce
//! identical manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const FILE_NAME: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<InputHash>,
    pub inputs_sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> Result<String, CliError> {
    let data = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", data.len()).as_bytes());
    h.update(&data);
    Ok(hex(&h.finalize()))
}

fn collect_files(dir: &Path, rel: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        let name = rel.join(entry.file_name());
        if path.is_dir() {
            collect_files(&path, &name, out)?;
        } else if entry.file_name() != FILE_NAME {
            out.push(name);
        }
    }
    Ok(())
}

pub fn hash_path(path: &Path) -> Result<String, CliError> {
    if !path.is_dir() {
        return hash_file(path);
    }
    let mut files = Vec::new();
    collect_files(path, Path::new(""), &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let fh = hash_file(&path.join(&f))?;
        h.update(f.to_string_lossy().as_bytes());
        h.update(b"\0");
        h.update(fh.as_bytes());
        h.update(b"\n");
    }
    Ok(hex(&h.finalize()))
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, inputs: &[&Path]) -> Result<Self, CliError> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    path: p.to_path_buf(),
                    sha256: hash_path(p)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut h = Sha256::new();
        for i in &inputs {
            h.update(i.sha256.as_bytes());
            h.update(b"\n");
        }
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config: config.clone(),
            inputs,
            inputs_sha256: hex(&h.finalize()),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(FILE_NAME);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
