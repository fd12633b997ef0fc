use serde::{Deserialize, Serialize};

use crate::io::fingerprint;
use crate::{Error, Result};

/// How the context window feeds the hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    /// Hidden layer is the mean of the context input vectors; one update per target.
    #[default]
    Averaged,
    /// Every (target, context word) pair is its own update.
    Pairwise,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Embedding dimensionality.
    pub dim: usize,
    /// Maximal context half-width; the actual half-width is uniform on `1..=beta`.
    pub beta: u32,
    /// Negative samples per update.
    pub negative: usize,
    /// Frequency subsampling threshold. `inf` disables subsampling.
    pub subsample_t: f64,
    pub iterations: u32,
    pub workers: usize,
    pub alpha0: f32,
    /// The learning rate never decays below `alpha0 * min_alpha_fraction`.
    pub min_alpha_fraction: f32,
    pub seed: u64,
    #[serde(default)]
    pub context_mode: ContextMode,
}

impl TrainConfig {
    pub const DEFAULT_DIM: usize = 200;
    pub const DEFAULT_NEGATIVE: usize = 25;
    pub const DEFAULT_SUBSAMPLE: f64 = 1e-4;
    pub const DEFAULT_ITERATIONS: u32 = 30;
    pub const DEFAULT_WORKERS: usize = 16;
    pub const DEFAULT_ALPHA: f32 = 0.05;
    pub const DEFAULT_MIN_ALPHA_FRACTION: f32 = 1e-4;

    /// The production settings (200 dimensions, 25 negatives, threshold 1e-4,
    /// 30 iterations, 16 workers) at the given scale.
    pub fn with_beta(beta: u32) -> Self {
        TrainConfig {
            dim: Self::DEFAULT_DIM,
            beta,
            negative: Self::DEFAULT_NEGATIVE,
            subsample_t: Self::DEFAULT_SUBSAMPLE,
            iterations: Self::DEFAULT_ITERATIONS,
            workers: Self::DEFAULT_WORKERS,
            alpha0: Self::DEFAULT_ALPHA,
            min_alpha_fraction: Self::DEFAULT_MIN_ALPHA_FRACTION,
            seed: 1,
            context_mode: ContextMode::Averaged,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.beta == 0 {
            return bad("beta must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad(format!("alpha0 must be positive and finite, got {}", self.alpha0));
        }
        if !(self.min_alpha_fraction > 0.0 && self.min_alpha_fraction <= 1.0) {
            return bad(format!(
                "min_alpha_fraction must be in (0, 1], got {}",
                self.min_alpha_fraction
            ));
        }
        if self.subsample_t.is_nan() || self.subsample_t <= 0.0 {
            return bad(format!("subsample_t must be positive, got {}", self.subsample_t));
        }
        Ok(())
    }

    /// Digest of every setting except `beta` and `seed`; identical across the
    /// cells of one sweep.
    pub fn fingerprint(&self) -> u64 {
        let mut c = self.clone();
        c.beta = 0;
        c.seed = 0;
        let text = toml::to_string(&c).expect("config serializes");
        fingerprint(text.as_bytes())
    }
}
