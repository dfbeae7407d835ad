//! Service configuration: a TOML file with `[service]`, `[planner]` and
//! `[train]` sections, then `TABCHAIN_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabchain_core::planner::DEFAULT_VAGUENESS_THRESHOLD;
use tabchain_encoder::TrainConfig;
use thiserror::Error;

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {var}: {value:?}")]
    Env { var: String, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    pub max_upload_bytes: usize,
    /// Permissive CORS headers, for a browser client on another origin.
    pub cors: bool,
    /// Pretrained encoder weights; a seeded initialization when absent.
    pub encoder_params: Option<PathBuf>,
    pub encoder_seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".to_string(),
            data_dir: PathBuf::from("tabchain-data"),
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            cors: false,
            encoder_params: None,
            encoder_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub vagueness_threshold: f64,
    /// Measure registry TOML; the built-in registry when absent.
    pub registry: Option<PathBuf>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            vagueness_threshold: DEFAULT_VAGUENESS_THRESHOLD,
            registry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub service: ServiceConfig,
    pub planner: PlannerConfig,
    pub train: TrainConfig,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads `path` if given (defaults otherwise), then applies the
    /// process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let bad = |var: &str, value: &str| ConfigError::Env {
            var: var.to_string(),
            value: value.to_string(),
        };
        if let Some(v) = lookup("TABCHAIN_BIND") {
            self.service.bind = v;
        }
        if let Some(v) = lookup("TABCHAIN_DATA_DIR") {
            self.service.data_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup("TABCHAIN_MAX_UPLOAD_BYTES") {
            self.service.max_upload_bytes = v.trim().parse().map_err(|_| bad("TABCHAIN_MAX_UPLOAD_BYTES", &v))?;
        }
        if let Some(v) = lookup("TABCHAIN_VAGUENESS_THRESHOLD") {
            self.planner.vagueness_threshold =
                v.trim().parse().map_err(|_| bad("TABCHAIN_VAGUENESS_THRESHOLD", &v))?;
        }
        if let Some(v) = lookup("TABCHAIN_CORS") {
            self.service.cors = parse_bool(&v).ok_or_else(|| bad("TABCHAIN_CORS", &v))?;
        }
        self.check()
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let t = self.planner.vagueness_threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(ConfigError::Invalid(format!("vagueness_threshold {t} is outside [0, 1]")));
        }
        if self.service.max_upload_bytes == 0 {
            return Err(ConfigError::Invalid("max_upload_bytes must be positive".into()));
        }
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn defaults() {
        let c = Config::default();
        assert_eq!(c.service.max_upload_bytes, 32 << 20);
        assert_eq!(c.planner.vagueness_threshold, 0.8);
        assert_eq!(c.train.learning_rate, 1e-3);
        assert!(!c.service.cors);
    }

    #[test]
    fn sections_parse() {
        let c = Config::from_toml(
            "[service]\nbind = \"0.0.0.0:9000\"\ncors = true\n[planner]\nvagueness_threshold = 0.5\n[train]\nsteps = 10\n",
        )
        .unwrap();
        assert_eq!(c.service.bind, "0.0.0.0:9000");
        assert!(c.service.cors);
        assert_eq!(c.planner.vagueness_threshold, 0.5);
        assert_eq!(c.train.steps, 10);
        assert_eq!(c.train.mask_frac, 0.15);
        assert!(Config::from_toml("[service]\nport = 1\n").is_err());
        assert!(Config::from_toml("[train]\nsteps = 0\n").is_err());
        assert!(Config::from_toml("[planner]\nvagueness_threshold = 2.0\n").is_err());
    }

    #[test]
    fn env_overrides() {
        let env: HashMap<&str, &str> = [
            ("TABCHAIN_BIND", "127.0.0.1:1"),
            ("TABCHAIN_DATA_DIR", "/tmp/x"),
            ("TABCHAIN_MAX_UPLOAD_BYTES", "100"),
            ("TABCHAIN_VAGUENESS_THRESHOLD", "0.3"),
            ("TABCHAIN_CORS", "yes"),
        ]
        .into();
        let mut c = Config::default();
        c.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(c.service.bind, "127.0.0.1:1");
        assert_eq!(c.service.data_dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.service.max_upload_bytes, 100);
        assert_eq!(c.planner.vagueness_threshold, 0.3);
        assert!(c.service.cors);
        let mut c = Config::default();
        let err = c.apply_env(|k| (k == "TABCHAIN_MAX_UPLOAD_BYTES").then(|| "lots".to_string()));
        assert!(matches!(err, Err(ConfigError::Env { .. })));
    }
}
