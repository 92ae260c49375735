//! Plain-text run configuration: `key = value` lines, `#` comments. Every
//! command validates its full configuration (unknown keys included) before
//! producing any output.

use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    raw: Vec<u8>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(raw.clone())
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        Self::parse(&text, raw)
    }

    pub fn from_text(text: &str) -> Result<RunConfig> {
        Self::parse(text, text.as_bytes().to_vec())
    }

    fn parse(text: &str, raw: Vec<u8>) -> Result<RunConfig> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(RunConfig { values, raw })
    }

    /// Reject keys outside the accepted set of the running command.
    pub fn restrict(&self, allowed: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "unknown config key '{key}' (accepted: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// FNV fingerprint of the raw config bytes.
    pub fn hash(&self) -> String {
        format!("{:016x}", super::fnv1a64(&self.raw))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required config key '{key}'")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("config key '{key}': cannot parse '{s}'"))),
        }
    }

    pub fn require_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let s = self.require(key)?;
        s.parse()
            .map_err(|_| Error::Config(format!("config key '{key}': cannot parse '{s}'")))
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(Error::Config(format!(
                "config key '{key}': expected a boolean, got '{other}'"
            ))),
        }
    }

    pub fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require(key)?))
    }

    /// Comma-separated list of positive integers.
    pub fn get_usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("config key '{key}': bad entry '{p}'")))
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let cfg = RunConfig::from_text(
            "# a comment\n\n seed = 42 \nlooks=1.5\npath = /tmp/x y\n",
        )
        .unwrap();
        assert_eq!(cfg.get("seed"), Some("42"));
        assert_eq!(cfg.require_parsed::<f64>("looks").unwrap(), 1.5);
        assert_eq!(cfg.get("path"), Some("/tmp/x y"));
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(RunConfig::from_text("a=1\na=2").is_err());
        assert!(RunConfig::from_text("no equals sign").is_err());
        assert!(RunConfig::from_text("=1").is_err());
    }

    #[test]
    fn restrict_rejects_unknown_keys() {
        let cfg = RunConfig::from_text("seed=1\nmystery=2").unwrap();
        assert!(cfg.restrict(&["seed"]).is_err());
        assert!(cfg.restrict(&["seed", "mystery"]).is_ok());
    }

    #[test]
    fn typed_getters() {
        let cfg = RunConfig::from_text("n=8\nflag=true\nlist=1,2, 3").unwrap();
        assert_eq!(cfg.get_parsed("n", 0usize).unwrap(), 8);
        assert_eq!(cfg.get_parsed("missing", 5usize).unwrap(), 5);
        assert!(cfg.get_bool("flag", false).unwrap());
        assert!(!cfg.get_bool("missing", false).unwrap());
        assert_eq!(cfg.get_usize_list("list", &[]).unwrap(), vec![1, 2, 3]);
        assert!(cfg.get_parsed::<usize>("flag", 0).is_err());
        assert!(cfg.require("absent").is_err());
    }

    #[test]
    fn hash_depends_on_content() {
        let a = RunConfig::from_text("seed=1").unwrap();
        let b = RunConfig::from_text("seed=2").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::from_text("seed=1").unwrap().hash());
    }
}
