use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::engine::SEED_DERIVATION;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub wall_seconds: f64,
    pub events: u64,
    pub trajectories: u64,
    pub workers: usize,
}

/// Written last into a run directory; its presence with `complete` set marks
/// the directory as a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub complete: bool,
    pub version: String,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub config: ExperimentConfig,
    pub telemetry: Telemetry,
    /// File name → sha256 hex.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<(u64, String)>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, telemetry: Telemetry) -> Self {
        RunManifest {
            complete: true,
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.seed,
            seed_derivation: SEED_DERIVATION.to_string(),
            config: config.clone(),
            telemetry,
            outputs: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    /// Digest the named outputs in `dir` and write the manifest.
    pub fn commit(mut self, dir: &Path, outputs: &[&str]) -> Result<Self> {
        for name in outputs {
            self.outputs.insert((*name).to_string(), sha256_file(&dir.join(name))?);
        }
        self.complete &= self.failures.is_empty();
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(".manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&self)? + "\n").map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(self)
    }

    /// Load the manifest of a finished run; missing or incomplete runs fail.
    pub fn load_complete(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::IncompleteRun(dir.to_path_buf()))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let manifest: RunManifest = serde_json::from_str(&text)?;
        if !manifest.complete {
            return Err(Error::IncompleteRun(dir.to_path_buf()));
        }
        Ok(manifest)
    }

    /// Re-digest every recorded output; returns the names that differ.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for (name, digest) in &self.outputs {
            if &sha256_file(&dir.join(name))? != digest {
                bad.push(name.clone());
            }
        }
        Ok(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_and_load() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        assert!(matches!(
            RunManifest::load_complete(dir.path()),
            Err(Error::IncompleteRun(_))
        ));
        let m = RunManifest::new(&ExperimentConfig::default(), Telemetry::default())
            .commit(dir.path(), &["a.csv"])
            .unwrap();
        assert_eq!(RunManifest::load_complete(dir.path()).unwrap(), m);
        assert!(m.verify(dir.path()).unwrap().is_empty());
        std::fs::write(dir.path().join("a.csv"), "x\n2\n").unwrap();
        assert_eq!(m.verify(dir.path()).unwrap(), vec!["a.csv".to_string()]);
    }

    #[test]
    fn failures_mark_incomplete() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(&ExperimentConfig::default(), Telemetry::default());
        m.failures.push((3, "boom".into()));
        m.commit(dir.path(), &[]).unwrap();
        assert!(matches!(
            RunManifest::load_complete(dir.path()),
            Err(Error::IncompleteRun(_))
        ));
    }
}
