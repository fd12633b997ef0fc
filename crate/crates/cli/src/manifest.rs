use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const RUN_FILE: &str = "run.toml";

/// One invocation recorded in a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub command: String,
    pub args: Vec<String>,
    /// Unix seconds.
    pub started: f64,
    pub finished: f64,
    /// Effective settings, enough to rerun the command on the same corpus.
    pub config: toml::Table,
    pub outputs: Vec<PathBuf>,
}

/// Append-only log of the commands that wrote into an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "scalevec::io::hex64::option"
    )]
    pub corpus_fingerprint: Option<u64>,
    #[serde(default)]
    pub commands: Vec<CommandRecord>,
}

impl RunManifest {
    pub fn new() -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            corpus_fingerprint: None,
            commands: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(RUN_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Loads the manifest in `dir` if there is one and appends `record`.
    pub fn append(dir: &Path, corpus_fingerprint: Option<u64>, record: CommandRecord) -> Result<PathBuf> {
        let mut m = if dir.join(RUN_FILE).exists() {
            Self::load(dir)?
        } else {
            Self::new()
        };
        m.tool_version = env!("CARGO_PKG_VERSION").into();
        if corpus_fingerprint.is_some() {
            m.corpus_fingerprint = corpus_fingerprint;
        }
        m.commands.push(record);
        let path = dir.join(RUN_FILE);
        fs::write(&path, toml::to_string(&m)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        Self::new()
    }
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Serializes any config struct into a table for the manifest.
pub fn snapshot<T: Serialize>(value: &T) -> Result<toml::Table> {
    Ok(toml::Table::try_from(value)?)
}
