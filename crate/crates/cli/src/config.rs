use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use scalevec::{ContextMode, TrainConfig};

/// Keys accepted in a configuration file. Every key is optional; anything
/// not listed is rejected with its name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dim: Option<usize>,
    pub beta: Option<u32>,
    pub negative: Option<usize>,
    pub subsample_t: Option<f64>,
    pub iterations: Option<u32>,
    pub workers: Option<usize>,
    pub alpha0: Option<f32>,
    pub min_alpha_fraction: Option<f32>,
    pub seed: Option<u64>,
    pub context_mode: Option<ContextMode>,
    /// Sweep only: scale spec such as `"1..100"` or `"1,2,5"`.
    pub scales: Option<String>,
    /// Sweep only.
    pub replicas: Option<u32>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {}", e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| path.display().to_string())
    }
}

/// Training flags. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Configuration file (TOML)
    #[arg(long, short = 'c')]
    pub config: Option<std::path::PathBuf>,
    /// Maximal context half-width
    #[arg(long)]
    pub beta: Option<u32>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Negative samples per update
    #[arg(long)]
    pub negative: Option<usize>,
    /// Subsampling threshold; `inf` disables subsampling
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Initial learning rate
    #[arg(long)]
    pub alpha: Option<f32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    pub context_mode: Option<ContextMode>,
}

fn parse_mode(s: &str) -> Result<ContextMode, String> {
    match s {
        "averaged" => Ok(ContextMode::Averaged),
        "pairwise" => Ok(ContextMode::Pairwise),
        _ => Err(format!("expected averaged or pairwise, got {s:?}")),
    }
}

impl TrainFlags {
    pub fn file(&self) -> Result<ConfigFile> {
        match &self.config {
            Some(p) => ConfigFile::load(p),
            None => Ok(ConfigFile::default()),
        }
    }

    /// Effective training config: defaults, then the file, then flags.
    /// `beta` may be left out when `need_beta` is false (sweeps set it per cell).
    pub fn resolve(&self, file: &ConfigFile, need_beta: bool) -> Result<TrainConfig> {
        let beta = match self.beta.or(file.beta) {
            Some(b) => b,
            None if need_beta => bail!("beta is required: pass --beta or set it in the config file"),
            None => 1,
        };
        let mut c = TrainConfig::with_beta(beta);
        macro_rules! layer {
            ($field:ident, $flag:ident) => {
                if let Some(v) = self.$flag.or(file.$field) {
                    c.$field = v;
                }
            };
        }
        layer!(dim, dim);
        layer!(negative, negative);
        layer!(subsample_t, subsample);
        layer!(iterations, iterations);
        layer!(workers, workers);
        layer!(alpha0, alpha);
        layer!(seed, seed);
        layer!(context_mode, context_mode);
        if let Some(v) = file.min_alpha_fraction {
            c.min_alpha_fraction = v;
        }
        c.validate()?;
        Ok(c)
    }
}
