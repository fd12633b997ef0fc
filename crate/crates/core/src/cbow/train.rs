use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{AtomicMatrix, RowStore};
use super::objective::{cbow_update, Scratch};
use super::{init_embedding, sample_window, ContextMode, Embedding, NegativeSampler, TrainConfig};
use crate::corpus::{ids_fingerprint, subsample_keep_prob, Vocabulary};
use crate::{Error, Result};

/// Positions a worker processes between learning-rate refreshes.
const LR_REFRESH: u64 = 10_000;

const REPORT_EVERY: u64 = 100_000;

/// Context of position `t` with half-width `b`, clipped at both ends.
pub(crate) fn window_context(seq: &[u32], t: usize, b: usize, out: &mut Vec<u32>) {
    let lo = t.saturating_sub(b);
    let hi = (t + b).min(seq.len() - 1);
    out.clear();
    out.extend_from_slice(&seq[lo..t]);
    out.extend_from_slice(&seq[t + 1..=hi]);
}

/// Training progress, as reported to a [`ProgressFn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub processed: u64,
    pub total: u64,
    pub alpha: f32,
    /// Mean loss per update since the previous report.
    pub mean_loss: f64,
}

pub type ProgressFn<'a> = dyn Fn(&Progress) + Sync + 'a;

/// Linear learning-rate decay from `alpha0` to `alpha0 * min_fraction` over
/// all positions of all iterations, shared by the workers.
#[derive(Debug)]
pub struct LearningRate {
    alpha0: f32,
    min_fraction: f32,
    total: u64,
    processed: AtomicU64,
}

impl LearningRate {
    pub fn new(config: &TrainConfig, corpus_len: usize) -> Self {
        LearningRate {
            alpha0: config.alpha0,
            min_fraction: config.min_alpha_fraction,
            total: config.iterations as u64 * corpus_len as u64,
            processed: AtomicU64::new(0),
        }
    }

    pub fn current(&self) -> f32 {
        let done = self.processed.load(Ordering::Relaxed) as f64;
        let frac = (1.0 - done / (self.total as f64 + 1.0)) as f32;
        self.alpha0 * frac.max(self.min_fraction)
    }

    pub fn processed(&self) -> u64 {
        self.processed.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn advance(&self, n: u64) {
        self.processed.fetch_add(n, Ordering::Relaxed);
    }
}

/// Counters for one or more passes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainStats {
    pub updates: u64,
    /// Targets whose context came out empty.
    pub skipped: u64,
    pub kept_positions: u64,
    pub loss_sum: f64,
}

impl TrainStats {
    pub fn mean_loss(&self) -> f64 {
        if self.updates == 0 {
            f64::NAN
        } else {
            self.loss_sum / self.updates as f64
        }
    }

    fn merge(&mut self, o: &TrainStats) {
        self.updates += o.updates;
        self.skipped += o.skipped;
        self.kept_positions += o.kept_positions;
        self.loss_sum += o.loss_sum;
    }
}

/// Summary of a complete [`train`] run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    /// Counters of the final iteration.
    pub last_iteration: TrainStats,
    pub total: TrainStats,
    pub final_alpha: f32,
    pub seconds: f64,
}

/// Everything a pass needs besides the parameters and the RNG.
struct PassContext<'a> {
    config: &'a TrainConfig,
    sampler: &'a NegativeSampler,
    keep: &'a [f32],
    lr: &'a LearningRate,
    progress: Option<&'a ProgressFn<'a>>,
}

/// Per-word keep probabilities for frequency subsampling.
fn keep_table(vocab: &Vocabulary, t: f64) -> Result<Vec<f32>> {
    vocab
        .counts()
        .iter()
        .map(|&c| subsample_keep_prob(c, vocab.total_tokens(), t).map(|p| p as f32))
        .collect()
}

struct Buffers {
    scratch: Scratch,
    negatives: Vec<u32>,
    context: Vec<u32>,
    kept: Vec<u32>,
}

impl Buffers {
    fn new(dim: usize) -> Self {
        Buffers {
            scratch: Scratch::new(dim),
            negatives: Vec::new(),
            context: Vec::new(),
            kept: Vec::new(),
        }
    }
}

/// Applies one update for `target` in the configured context mode.
/// Returns `None` when the context is empty.
#[allow(clippy::too_many_arguments)]
fn step<I: RowStore, O: RowStore, R: Rng>(
    input: &mut I,
    output: &mut O,
    target: u32,
    context: &[u32],
    config: &TrainConfig,
    alpha: f32,
    sampler: &NegativeSampler,
    rng: &mut R,
    scratch: &mut Scratch,
    negatives: &mut Vec<u32>,
) -> Option<(f32, u64)> {
    if context.is_empty() {
        return None;
    }
    match config.context_mode {
        ContextMode::Averaged => {
            sampler.fill_negatives(target, config.negative, rng, negatives);
            let loss = cbow_update(input, output, target, context, negatives, alpha, scratch);
            Some((loss, 1))
        }
        ContextMode::Pairwise => {
            let mut loss = 0.0;
            for &c in context {
                sampler.fill_negatives(target, config.negative, rng, negatives);
                loss += cbow_update(input, output, target, &[c], negatives, alpha, scratch);
            }
            Some((loss, context.len() as u64))
        }
    }
}

/// One pass over `ids`: subsample, then for every surviving position draw a
/// half-width `b`, gather the survivors within `b` on each side (clipped at
/// the ends of `ids`) and update.
fn run_pass<I: RowStore, O: RowStore, R: Rng>(
    input: &mut I,
    output: &mut O,
    ids: &[u32],
    ctx: &PassContext<'_>,
    rng: &mut R,
    buf: &mut Buffers,
) -> TrainStats {
    let config = ctx.config;
    let mut stats = TrainStats::default();

    let Buffers {
        scratch,
        negatives,
        context,
        kept,
    } = buf;

    // Survivors of subsampling, with their raw positions for the schedule.
    kept.clear();
    let mut kept_pos: Vec<u32> = Vec::with_capacity(ids.len());
    for (pos, &id) in ids.iter().enumerate() {
        let p = ctx.keep[id as usize];
        if p >= 1.0 || rng.random::<f32>() < p {
            kept.push(id);
            kept_pos.push(pos as u32);
        }
    }
    stats.kept_positions = kept.len() as u64;

    let mut alpha = ctx.lr.current();
    let mut since_refresh = 0u64;
    let mut last_raw = 0u64;
    let mut report_loss = 0.0f64;
    let mut report_updates = 0u64;

    for t in 0..kept.len() {
        let raw = kept_pos[t] as u64;
        since_refresh += raw - last_raw;
        last_raw = raw;
        if since_refresh >= LR_REFRESH {
            ctx.lr.advance(since_refresh);
            since_refresh = 0;
            alpha = ctx.lr.current();
            if let Some(report) = ctx.progress {
                if report_updates >= REPORT_EVERY {
                    report(&Progress {
                        processed: ctx.lr.processed(),
                        total: ctx.lr.total(),
                        alpha,
                        mean_loss: report_loss / report_updates as f64,
                    });
                    report_loss = 0.0;
                    report_updates = 0;
                }
            }
        }

        let b = sample_window(config.beta, rng) as usize;
        window_context(kept, t, b, context);

        match step(
            input,
            output,
            kept[t],
            context,
            config,
            alpha,
            ctx.sampler,
            rng,
            scratch,
            negatives,
        ) {
            Some((loss, updates)) => {
                stats.loss_sum += loss as f64;
                stats.updates += updates;
                report_loss += loss as f64;
                report_updates += updates;
            }
            None => stats.skipped += 1,
        }
    }
    ctx.lr.advance(since_refresh + (ids.len() as u64 - last_raw));
    stats
}

/// One SGD update for a (target, context) example at learning rate `alpha`.
///
/// Returns the loss before the update, or `None` (and changes nothing) when
/// `context` is empty.
pub fn train_step<R: Rng>(
    embedding: &mut Embedding,
    target: u32,
    context: &[u32],
    config: &TrainConfig,
    alpha: f32,
    sampler: &NegativeSampler,
    rng: &mut R,
) -> Result<Option<f32>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::contract(format!("learning rate must be positive, got {alpha}")));
    }
    let v = embedding.len() as u32;
    if target >= v || context.iter().any(|&c| c >= v) {
        return Err(Error::contract("word id out of range"));
    }
    let dim = embedding.dim();
    let (input, output) = embedding
        .parts_mut()
        .ok_or_else(|| Error::contract("training needs output vectors"))?;
    let mut scratch = Scratch::new(dim);
    let mut negatives = Vec::new();
    Ok(step(
        input,
        output,
        target,
        context,
        config,
        alpha,
        sampler,
        rng,
        &mut scratch,
        &mut negatives,
    )
    .map(|(loss, _)| loss))
}

/// One single-threaded pass over the corpus, sharing `lr` with other passes.
pub fn train_epoch<R: Rng>(
    embedding: &mut Embedding,
    ids: &[u32],
    config: &TrainConfig,
    lr: &LearningRate,
    rng: &mut R,
) -> Result<TrainStats> {
    if ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    config.validate()?;
    let sampler = NegativeSampler::from_vocab(embedding.vocab())?;
    let keep = keep_table(embedding.vocab(), config.subsample_t)?;
    if ids.iter().any(|&id| id as usize >= keep.len()) {
        return Err(Error::contract("corpus contains ids outside the vocabulary"));
    }
    let dim = embedding.dim();
    let ctx = PassContext {
        config,
        sampler: &sampler,
        keep: &keep,
        lr,
        progress: None,
    };
    let (input, output) = embedding
        .parts_mut()
        .ok_or_else(|| Error::contract("training needs output vectors"))?;
    let mut buf = Buffers::new(dim);
    Ok(run_pass(input, output, ids, &ctx, rng, &mut buf))
}

/// Seed of worker `w`'s random stream.
fn worker_seed(seed: u64, worker: usize) -> u64 {
    crate::sweep::mix64(seed ^ crate::sweep::mix64(worker as u64 + 1))
}

/// Trains a fresh embedding on `ids`.
///
/// With `workers == 1` the run is a deterministic function of the corpus and
/// config. With more workers the corpus is split into contiguous shards that
/// update the shared matrices concurrently without locks.
pub fn train(
    ids: &[u32],
    vocab: Arc<Vocabulary>,
    config: &TrainConfig,
    progress: Option<&ProgressFn<'_>>,
) -> Result<(Embedding, TrainReport)> {
    config.validate()?;
    if ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if ids.iter().any(|&id| id as usize >= vocab.len()) {
        return Err(Error::contract("corpus contains ids outside the vocabulary"));
    }
    let started = Instant::now();
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut embedding = init_embedding(vocab.clone(), config, &mut init_rng)?;
    let sampler = NegativeSampler::from_vocab(&vocab)?;
    let keep = keep_table(&vocab, config.subsample_t)?;
    let lr = LearningRate::new(config, ids.len());
    let ctx = PassContext {
        config,
        sampler: &sampler,
        keep: &keep,
        lr: &lr,
        progress,
    };

    let workers = config.workers.min(ids.len()).max(1);
    let mut total = TrainStats::default();
    let mut last = TrainStats::default();

    if workers == 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(config.seed, 0));
        let mut buf = Buffers::new(config.dim);
        let (input, output) = embedding.parts_mut().expect("fresh embedding has outputs");
        for _ in 0..config.iterations {
            last = run_pass(input, output, ids, &ctx, &mut rng, &mut buf);
            total.merge(&last);
        }
    } else {
        let (vocab, input, output, meta) = embedding.into_parts();
        let input = AtomicMatrix::from_matrix(input);
        let output = AtomicMatrix::from_matrix(output.expect("fresh embedding has outputs"));
        let shard_len = ids.len().div_ceil(workers);
        let per_iter: Mutex<Vec<TrainStats>> = Mutex::new(vec![TrainStats::default(); config.iterations as usize]);

        std::thread::scope(|scope| {
            for (w, shard) in ids.chunks(shard_len).enumerate() {
                let (input, output, ctx, per_iter) = (&input, &output, &ctx, &per_iter);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(config.seed, w));
                    let mut buf = Buffers::new(config.dim);
                    let (mut i, mut o) = (input, output);
                    for it in 0..config.iterations as usize {
                        let s = run_pass(&mut i, &mut o, shard, ctx, &mut rng, &mut buf);
                        per_iter.lock().unwrap()[it].merge(&s);
                    }
                });
            }
        });
        for s in per_iter.into_inner().unwrap() {
            total.merge(&s);
            last = s;
        }
        embedding = Embedding::new(vocab, input.into_matrix(), Some(output.into_matrix()), meta)?;
    }

    let mut meta = *embedding.meta().expect("fresh embedding has provenance");
    meta.corpus_fingerprint = ids_fingerprint(ids);
    embedding.set_meta(Some(meta));
    embedding.validate()?;

    Ok((
        embedding,
        TrainReport {
            last_iteration: last,
            total,
            final_alpha: lr.current(),
            seconds: started.elapsed().as_secs_f64(),
        },
    ))
}
