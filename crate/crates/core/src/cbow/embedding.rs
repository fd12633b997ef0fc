use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, TrainConfig};
use crate::corpus::Vocabulary;
use crate::{Error, Result};

/// Where an embedding came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub beta: u32,
    pub seed: u64,
    pub iterations: u32,
    pub dim: u32,
    #[serde(with = "crate::io::hex64")]
    pub corpus_fingerprint: u64,
    #[serde(with = "crate::io::hex64")]
    pub vocab_fingerprint: u64,
    #[serde(with = "crate::io::hex64")]
    pub config_fingerprint: u64,
}

/// Input (`v`) and output (`v'`) vectors for every vocabulary word.
///
/// The input vectors are the published embedding. Output vectors are only
/// needed to keep training or to score, and may be absent after loading.
/// `meta` is `None` when the provenance is unknown (reference-format imports).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    vocab: Arc<Vocabulary>,
    input: Matrix<f32>,
    output: Option<Matrix<f32>>,
    meta: Option<Provenance>,
}

impl Embedding {
    pub fn new(
        vocab: Arc<Vocabulary>,
        input: Matrix<f32>,
        output: Option<Matrix<f32>>,
        meta: Option<Provenance>,
    ) -> Result<Self> {
        let e = Embedding {
            vocab,
            input,
            output,
            meta,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.vocab.len();
        if self.input.rows() != v {
            return Err(Error::Format(format!(
                "input matrix has {} rows for a vocabulary of {v}",
                self.input.rows()
            )));
        }
        if self.input.cols() == 0 {
            return Err(Error::Format("embedding dimension is zero".into()));
        }
        if let Some(out) = &self.output {
            if out.rows() != v || out.cols() != self.input.cols() {
                return Err(Error::Format(format!(
                    "output matrix is {}x{}, input is {}x{}",
                    out.rows(),
                    out.cols(),
                    v,
                    self.input.cols()
                )));
            }
        }
        if let Some(meta) = &self.meta {
            if meta.dim as usize != self.input.cols() {
                return Err(Error::Format(format!(
                    "metadata declares dim {} but matrices have {}",
                    meta.dim,
                    self.input.cols()
                )));
            }
        }
        let finite = |m: &Matrix<f32>| m.as_slice().iter().all(|x| x.is_finite());
        if !finite(&self.input) || !self.output.as_ref().is_none_or(finite) {
            return Err(Error::NonFinite("embedding contains NaN or infinity".into()));
        }
        Ok(())
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_arc(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    pub fn len(&self) -> usize {
        self.input.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.input.rows() == 0
    }

    pub fn input(&self) -> &Matrix<f32> {
        &self.input
    }

    pub fn output(&self) -> Option<&Matrix<f32>> {
        self.output.as_ref()
    }

    pub fn meta(&self) -> Option<&Provenance> {
        self.meta.as_ref()
    }

    pub fn set_meta(&mut self, meta: Option<Provenance>) {
        self.meta = meta;
    }

    /// Input vector of a word, if it is in the vocabulary.
    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.vocab.id(word).map(|id| self.input.row(id as usize))
    }

    pub fn without_output(mut self) -> Self {
        self.output = None;
        self
    }

    pub(crate) fn parts_mut(&mut self) -> Option<(&mut Matrix<f32>, &mut Matrix<f32>)> {
        let Embedding { input, output, .. } = self;
        output.as_mut().map(|o| (input, o))
    }

    pub(crate) fn into_parts(self) -> (Arc<Vocabulary>, Matrix<f32>, Option<Matrix<f32>>, Option<Provenance>) {
        (self.vocab, self.input, self.output, self.meta)
    }
}

/// Fresh model: input components uniform on `[-0.5/N, 0.5/N]`, outputs zero.
pub fn init_embedding<R: Rng>(vocab: Arc<Vocabulary>, config: &TrainConfig, rng: &mut R) -> Result<Embedding> {
    if vocab.is_empty() {
        return Err(Error::contract(
            "cannot initialize an embedding for an empty vocabulary",
        ));
    }
    config.validate()?;
    let n = config.dim;
    let mut input = Matrix::zeros(vocab.len(), n);
    let scale = 1.0 / n as f32;
    for x in input.as_mut_slice() {
        *x = (rng.random::<f32>() - 0.5) * scale;
    }
    let output = Matrix::zeros(vocab.len(), n);
    let meta = Provenance {
        beta: config.beta,
        seed: config.seed,
        iterations: config.iterations,
        dim: n as u32,
        corpus_fingerprint: 0,
        vocab_fingerprint: vocab.fingerprint(),
        config_fingerprint: config.fingerprint(),
    };
    Embedding::new(vocab, input, Some(output), Some(meta))
}

/// Output-layer score `u_k = v'_k · h`.
pub fn score(embedding: &Embedding, h: &[f32], k: u32) -> Result<f64> {
    let out = embedding
        .output()
        .ok_or_else(|| Error::contract("scoring needs output vectors"))?;
    if k as usize >= out.rows() {
        return Err(Error::contract(format!(
            "word id {k} out of range for vocabulary of {}",
            out.rows()
        )));
    }
    if h.len() != out.cols() {
        return Err(Error::contract(format!(
            "hidden vector has length {}, expected {}",
            h.len(),
            out.cols()
        )));
    }
    Ok(out
        .row(k as usize)
        .iter()
        .zip(h)
        .map(|(&a, &b)| a as f64 * b as f64)
        .sum())
}

/// Numerically stable softmax (max-score subtraction).
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("softmax score {bad}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Full posterior over the vocabulary given the hidden layer. Diagnostic
/// only: training uses negative sampling.
pub fn softmax_posterior(embedding: &Embedding, h: &[f32]) -> Result<Vec<f64>> {
    let scores = (0..embedding.len() as u32)
        .map(|k| score(embedding, h, k))
        .collect::<Result<Vec<_>>>()?;
    softmax(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab(n: usize) -> Arc<Vocabulary> {
        Arc::new(Vocabulary::from_sorted(
            (0..n).map(|i| (format!("w{i}"), (n - i) as u64)).collect(),
        ))
    }

    fn toy(output: Vec<f32>, dim: usize) -> Embedding {
        let v = vocab(output.len() / dim);
        Embedding::new(
            v.clone(),
            Matrix::zeros(v.len(), dim),
            Some(Matrix::from_vec(v.len(), dim, output)),
            None,
        )
        .unwrap()
    }

    #[test]
    fn init_bounds_and_determinism() {
        let config = TrainConfig::with_beta(1);
        let v = vocab(30);
        let a = init_embedding(v.clone(), &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = init_embedding(v, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.input().as_slice().iter().all(|x| x.abs() <= 0.0025));
        assert!(a.input().as_slice().iter().any(|x| *x != 0.0));
        assert!(a.output().unwrap().as_slice().iter().all(|x| *x == 0.0));
        assert_eq!(a.meta().unwrap().dim, 200);
    }

    #[test]
    fn score_examples() {
        let e = toy(vec![1.0, 0.0, 0.0, 1.0, 0.5, -2.0], 2);
        assert_eq!(score(&e, &[1.0, 0.0], 0).unwrap(), 1.0);
        assert_eq!(score(&e, &[0.0, 1.0], 0).unwrap(), 0.0);
        // 0.5 * 0.25 + (-2.0) * 0.75
        assert_eq!(score(&e, &[0.25, 0.75], 2).unwrap(), -1.375);
        assert!(score(&e, &[0.0, 1.0], 3).is_err());
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[3f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        let p = softmax(&[2.0; 4]).unwrap();
        assert!(p.iter().all(|x| (*x - 0.25).abs() < 1e-15));
        assert!(softmax(&[f64::NAN, 0.0]).is_err());
        let p = softmax(&[1000.0, 999.0, -5.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_uniform_for_equal_scores() {
        let e = toy(vec![0.0; 8], 2);
        let p = softmax_posterior(&e, &[1.0, 1.0]).unwrap();
        assert!(p.iter().all(|x| (*x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        let v = vocab(2);
        assert!(Embedding::new(v.clone(), Matrix::zeros(3, 2), None, None).is_err());
        let bad = Matrix::from_vec(2, 1, vec![0.0, f32::NAN]);
        assert!(matches!(Embedding::new(v, bad, None, None), Err(Error::NonFinite(_))));
    }

    proptest::proptest! {
        #[test]
        fn softmax_is_a_shift_invariant_distribution(
            scores in proptest::collection::vec(-50.0f64..50.0, 1..40),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&scores).unwrap();
            proptest::prop_assert!(p.iter().all(|x| *x > 0.0));
            proptest::prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
