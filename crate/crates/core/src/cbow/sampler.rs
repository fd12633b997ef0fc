use rand::Rng;

use crate::corpus::Vocabulary;
use crate::{Error, Result};

/// Exponent applied to word counts for the negative-sampling distribution.
pub const UNIGRAM_POWER: f64 = 0.75;

/// Probability that the word at offset `k` from the target falls inside a
/// window whose half-width is drawn uniformly from `1..=beta`:
/// `max(0, 1 - (k - 1) / beta)`.
pub fn window_inclusion_prob(k: u32, beta: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::contract("offset 0 is the target itself, not context"));
    }
    if beta == 0 {
        return Err(Error::contract("beta must be at least 1"));
    }
    Ok(beta.saturating_sub(k - 1) as f64 / beta as f64)
}

/// Draws the half-width of one context window, uniform on `1..=beta`.
#[inline]
pub fn sample_window<R: Rng + ?Sized>(beta: u32, rng: &mut R) -> u32 {
    debug_assert!(beta >= 1);
    rng.random_range(1..=beta.max(1))
}

/// Draws word ids with probability proportional to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::contract("negative sampler needs a nonempty vocabulary"));
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(counts.len());
        for &c in counts {
            if c == 0 {
                return Err(Error::contract("negative sampler needs positive counts"));
            }
            acc += (c as f64).powf(UNIGRAM_POWER);
            cumulative.push(acc);
        }
        Ok(NegativeSampler { cumulative })
    }

    pub fn from_vocab(vocab: &Vocabulary) -> Result<Self> {
        Self::new(vocab.counts())
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = *self.cumulative.last().unwrap();
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let p = (c - prev) / total;
                prev = c;
                p
            })
            .collect()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1) as u32
    }

    /// Fills `out` with `n` draws, redrawing any that hit `target`. With a
    /// one-word vocabulary no valid negative exists and `out` stays empty.
    pub fn fill_negatives<R: Rng + ?Sized>(&self, target: u32, n: usize, rng: &mut R, out: &mut Vec<u32>) {
        out.clear();
        if self.cumulative.len() < 2 {
            return;
        }
        while out.len() < n {
            let w = self.sample(rng);
            if w != target {
                out.push(w);
            }
        }
    }
}
