//! Run configuration: a sweep plus where and how to write its report.

use std::path::{Path, PathBuf};

use petallab_core::experiments::SweepConfig;
use petallab_core::report::Format;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SEED_ENV: &str = "PETALLAB_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("report")
}

fn default_formats() -> Vec<Format> {
    Format::ALL.to_vec()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.output.formats.is_empty() {
            return Err(CliError::Config("output.formats must not be empty".into()));
        }
        cfg.sweep
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Seed priority: command-line flag, then the config file, then
    /// `PETALLAB_SEED`, then 0. The result is stored back in the sweep.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<u64, CliError> {
        let env = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not a u64")))?,
            ),
            Err(_) => None,
        };
        let seed = flag.or(self.sweep.seed).or(env).unwrap_or(0);
        self.sweep.seed = Some(seed);
        Ok(seed)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output: OutputConfig::default(),
            sweep: SweepConfig::slit_strip_fixture(),
        }
    }
}
