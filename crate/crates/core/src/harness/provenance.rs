use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, Result};
use crate::corpus::EMBEDDING_VERSION;
use crate::trainer::HEAD_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// File name only, so records do not depend on where a run lives.
    pub name: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub embedding_format: u32,
    pub head_format: u32,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Provenance {
    pub fn new(stage: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            stage: stage.into(),
            config_hash: config_hash.into(),
            seed,
            embedding_format: EMBEDDING_VERSION,
            head_format: HEAD_VERSION,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_inputs(&mut self, paths: &[&Path]) -> Result<()> {
        for p in paths {
            self.inputs.push(FileDigest::of(p)?);
        }
        Ok(())
    }

    pub fn record_outputs(&mut self, paths: &[&Path]) -> Result<()> {
        for p in paths {
            self.outputs.push(FileDigest::of(p)?);
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join("provenance.json");
        let json = serde_json::to_string_pretty(self).expect("provenance serializes");
        std::fs::write(&path, json + "\n").map_err(io_err(&path))
    }
}
