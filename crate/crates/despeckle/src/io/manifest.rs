//! Run manifest: every command that produces artifacts records the seed, the
//! config fingerprint and the code version next to them. Contents are fully
//! deterministic (no timestamps), so identical runs produce identical
//! manifests.

use crate::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Manifest {
        Manifest {
            command: command.to_string(),
            seed,
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts: Vec::new(),
        }
    }

    /// Record an artifact path relative to the output directory.
    pub fn push(&mut self, path: &Path, out_dir: &Path) {
        let rel = path.strip_prefix(out_dir).unwrap_or(path);
        self.artifacts.push(rel.to_string_lossy().into_owned());
    }

    pub fn write(&mut self, out_dir: &Path) -> Result<PathBuf> {
        self.artifacts.sort();
        let path = out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_is_deterministic_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("simulate", 7, "abcd".to_string());
        m.push(&dir.path().join("b.s2s1"), dir.path());
        m.push(&dir.path().join("a.s2s1"), dir.path());
        let p1 = m.write(dir.path()).unwrap();
        let first = std::fs::read(&p1).unwrap();
        let mut m2 = Manifest::new("simulate", 7, "abcd".to_string());
        m2.push(&dir.path().join("a.s2s1"), dir.path());
        m2.push(&dir.path().join("b.s2s1"), dir.path());
        let p2 = m2.write(dir.path()).unwrap();
        assert_eq!(first, std::fs::read(&p2).unwrap());
        let parsed: Manifest = serde_json::from_slice(&first).unwrap();
        assert_eq!(parsed.artifacts, vec!["a.s2s1", "b.s2s1"]);
    }
}
