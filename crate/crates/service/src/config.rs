use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Agreement a tutorial submission needs against the hidden gold labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateParams {
    pub min_spearman: f64,
    pub max_mean_abs_diff: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            min_spearman: 0.6,
            max_mean_abs_diff: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub port: u16,
    /// Directory holding the database file. `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub gate: GateParams,
    pub restarts: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            port: 8080,
            data_dir: None,
            gate: GateParams::default(),
            restarts: wugkit::cluster::SolverParams::default().restarts,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("invalid config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {0}: {1:?}")]
    Env(&'static str, String),
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads the optional file, then applies `WUGKIT_*` overrides from `env`.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read(p.to_owned(), e))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        fn parsed<T: std::str::FromStr>(key: &'static str, raw: String) -> Result<T, ConfigError> {
            raw.trim().parse().map_err(|_| ConfigError::Env(key, raw))
        }
        if let Some(v) = env("WUGKIT_PORT") {
            config.port = parsed("WUGKIT_PORT", v)?;
        }
        if let Some(v) = env("WUGKIT_DATA_DIR") {
            config.data_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = env("WUGKIT_GATE_MIN_SPEARMAN") {
            config.gate.min_spearman = parsed("WUGKIT_GATE_MIN_SPEARMAN", v)?;
        }
        if let Some(v) = env("WUGKIT_GATE_MAX_MAD") {
            config.gate.max_mean_abs_diff = parsed("WUGKIT_GATE_MAX_MAD", v)?;
        }
        if let Some(v) = env("WUGKIT_RESTARTS") {
            config.restarts = parsed("WUGKIT_RESTARTS", v)?;
        }
        Ok(config)
    }

    pub fn from_env(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(path, |k| std::env::var(k).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wugkit.toml");
        std::fs::write(&path, "port = 9000\nrestarts = 4\n[gate]\nmin_spearman = 0.7\n").unwrap();
        let c = Config::load(Some(&path), |k| (k == "WUGKIT_PORT").then(|| "9100".to_string())).unwrap();
        assert_eq!(c.port, 9100);
        assert_eq!(c.restarts, 4);
        assert_eq!(c.gate.min_spearman, 0.7);
        assert_eq!(c.gate.max_mean_abs_diff, 0.5);
    }

    #[test]
    fn bad_override() {
        let err = Config::load(None, |k| (k == "WUGKIT_RESTARTS").then(|| "many".to_string())).unwrap_err();
        assert!(matches!(err, ConfigError::Env("WUGKIT_RESTARTS", _)));
    }
}
