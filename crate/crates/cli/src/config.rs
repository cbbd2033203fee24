use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use streamcast::{HarnessConfig, Method, MethodParams};

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_burnin() -> f64 {
    0.1
}

fn default_grid() -> usize {
    11
}

fn default_output() -> PathBuf {
    PathBuf::from("streamcast-out")
}

/// One batch run. `column` is a header name or a product of names such as
/// `"Quantity*UnitPrice"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rows: Option<usize>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_burnin")]
    pub burnin_frac: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub params: MethodParams,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; a relative `input` is taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
        if cfg.input.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.input = dir.join(&cfg.input);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.methods.is_empty() {
            anyhow::bail!("no methods selected");
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            anyhow::bail!("a method is listed twice");
        }
        if !(0.0..1.0).contains(&self.burnin_frac) {
            anyhow::bail!("burnin_frac must lie in [0, 1)");
        }
        if self.grid_points < 2 {
            anyhow::bail!("grid_points must be at least 2");
        }
        if self.column.trim().is_empty() {
            anyhow::bail!("column is empty");
        }
        if self.max_rows == Some(0) {
            anyhow::bail!("max_rows must be positive");
        }
        Ok(())
    }

    pub fn harness(&self) -> HarnessConfig {
        HarnessConfig {
            burnin_frac: self.burnin_frac,
            grid_points: self.grid_points,
            seed: self.seed,
        }
    }
}
