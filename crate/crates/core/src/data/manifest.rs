use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, Dataset, Split};

pub const MANIFEST_FORMAT: &str = "xtune-manifest v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
}

impl HostInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub total: usize,
    pub train: usize,
    pub test: usize,
}

/// Provenance record written next to every dataset file.
///
/// `config_hash` is the SHA-256 of the compact JSON form of `config`; the
/// host descriptor and warnings are not hashed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub experiment: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub host: HostInfo,
    pub rows: RowCounts,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    // serde_json maps are ordered by key, so the compact form is canonical
    let text = serde_json::to_string(config).expect("JSON values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// `data.csv` -> `data.manifest.json`.
pub fn manifest_path_for(dataset_path: impl AsRef<Path>) -> PathBuf {
    dataset_path.as_ref().with_extension("manifest.json")
}

impl Manifest {
    pub fn new(
        experiment: &str,
        config: &impl Serialize,
        rows: RowCounts,
    ) -> Result<Self, DataError> {
        let config = serde_json::to_value(config)?;
        Ok(Self {
            format: MANIFEST_FORMAT.to_string(),
            experiment: experiment.to_string(),
            config_hash: config_hash(&config),
            config,
            host: HostInfo::current(),
            rows,
            warnings: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn counts_of(d: &Dataset) -> RowCounts {
        let test = d.rows.iter().filter(|r| r.split == Split::Test).count();
        RowCounts {
            total: d.len(),
            train: d.len() - test,
            test,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.format != MANIFEST_FORMAT {
            return Err(DataError::Manifest(format!(
                "unsupported manifest format {:?}",
                m.format
            )));
        }
        if config_hash(&m.config) != m.config_hash {
            return Err(DataError::Manifest(
                "config hash does not match the recorded config".into(),
            ));
        }
        Ok(m)
    }

    /// Checks that `d` was produced under this manifest.
    pub fn verify(&self, d: &Dataset) -> Result<(), DataError> {
        if d.manifest_hash != self.config_hash {
            return Err(DataError::Manifest(format!(
                "dataset embeds hash {:?}, manifest records {:?}",
                d.manifest_hash, self.config_hash
            )));
        }
        Ok(())
    }
}
