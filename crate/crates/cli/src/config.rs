//! Flat key-value run configuration.
//!
//! Config files are lines of `key = value` (with `#` comments); CLI flags
//! override file values, which override defaults.  Every run writes a
//! manifest with the fully resolved configuration, the tool version and the
//! seed, sufficient to reproduce the outputs byte for byte (nothing
//! time-dependent is recorded).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Resolved key-value configuration (string-typed; commands parse on use).
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parse a flat config file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!(
                    "{}:{}: expected 'key = value', got '{raw}'",
                    path.display(),
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Apply one override (CLI flags win over file values).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| CliError::config(format!("config key '{key}': '{s}' is not a number"))),
        }
    }

    pub fn f64_required(&self, key: &str) -> Result<f64, CliError> {
        self.values
            .get(key)
            .ok_or_else(|| CliError::config(format!("missing required parameter '{key}'")))?
            .parse()
            .map_err(|_| CliError::config(format!("config key '{key}' is not a number")))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| CliError::config(format!("config key '{key}': '{s}' is not an integer"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.values.get(key).map(|s| s.as_str()).unwrap_or(default)
    }

    /// Comma-separated list of numbers.
    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse()
                        .map_err(|_| CliError::config(format!("config key '{key}': '{part}' is not a number")))
                })
                .collect(),
        }
    }

    /// All resolved entries, sorted by key.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Create the output directory and write the reproducibility manifest.
pub fn prepare_output(command: &str, config: &RunConfig) -> Result<PathBuf, CliError> {
    let out_dir = PathBuf::from(config.str_or("out", "out"));
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::config(format!("cannot create output dir {}: {e}", out_dir.display())))?;
    let mut manifest = String::new();
    manifest.push_str(&format!("version = sheq {}\n", env!("CARGO_PKG_VERSION")));
    manifest.push_str(&format!("command = {command}\n"));
    for (k, v) in config.entries() {
        manifest.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(out_dir.join("manifest.txt"), manifest)?;
    Ok(out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files_with_comments() {
        let dir = std::env::temp_dir().join("sheq-config-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        fs::write(&path, "# a comment\nnu = 1.5\nmeasure = exp_decay:1 # inline\n\nseed= 7\n").unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.f64_or("nu", 1.0).unwrap(), 1.5);
        assert_eq!(cfg.get("measure"), Some("exp_decay:1"));
        assert_eq!(cfg.u64_or("seed", 0).unwrap(), 7);
        assert_eq!(cfg.f64_or("lambda", 2.0).unwrap(), 2.0);
    }

    #[test]
    fn flags_override_file_values() {
        let mut cfg = RunConfig::default();
        cfg.set("nu", "1.0");
        cfg.set("nu", "2.0");
        assert_eq!(cfg.f64_or("nu", 0.0).unwrap(), 2.0);
    }

    #[test]
    fn malformed_lines_are_config_errors() {
        let dir = std::env::temp_dir().join("sheq-config-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        fs::write(&path, "nu 1.5\n").unwrap();
        assert!(RunConfig::from_file(&path).is_err());
    }
}
