//! Training embedding families over a grid of scales, with replicas, and
//! persisting them with provenance.
//!
//! A sweep directory holds one native embedding file per `(beta, replica)`
//! cell plus `manifest.toml`, which records every cell's seed, status and
//! file. The manifest is rewritten after each cell so an interrupted sweep
//! resumes where it stopped.

mod store;

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::cbow::{self, Embedding, TrainConfig};
use crate::corpus::{ids_fingerprint, Vocabulary};
use crate::{Error, Result};

pub use store::{
    decode_native, decode_reference, encode_native, encode_reference, export_reference, import_reference,
    load_embedding, save_embedding, EMBEDDING_MAGIC, FORMAT_VERSION,
};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// SplitMix64 finalizer; a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one sweep cell. For a fixed base seed this is injective in
/// `(beta, replica)`: the pair packs into one word and every later stage is
/// a bijection.
pub fn cell_seed(base: u64, beta: u32, replica: u32) -> u64 {
    let key = ((beta as u64) << 32) | replica as u64;
    mix64(base.wrapping_add(mix64(key)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub beta: u32,
    pub replica: u32,
}

impl CellKey {
    pub fn new(beta: u32, replica: u32) -> Self {
        CellKey { beta, replica }
    }

    pub fn file_name(&self) -> String {
        format!("beta{:03}_rep{:02}.stv", self.beta, self.replica)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub scales: Vec<u32>,
    pub replicas: u32,
    pub base_config: TrainConfig,
    pub out_dir: PathBuf,
    /// Train several cells at once instead of one after another.
    #[serde(default)]
    pub parallel_cells: bool,
    /// Keep output vectors in the cell files.
    #[serde(default)]
    pub include_output: bool,
}

impl SweepPlan {
    pub fn new(scales: Vec<u32>, replicas: u32, base_config: TrainConfig, out_dir: impl Into<PathBuf>) -> Self {
        SweepPlan {
            scales,
            replicas,
            base_config,
            out_dir: out_dir.into(),
            parallel_cells: false,
            include_output: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::Config("sweep needs at least one scale".into()));
        }
        if self.scales[0] == 0 {
            return Err(Error::Config("scales must be at least 1".into()));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("scales must be strictly increasing".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        self.base_config.validate()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellKey> + '_ {
        self.scales
            .iter()
            .flat_map(move |&b| (0..self.replicas).map(move |r| CellKey::new(b, r)))
    }

    /// The base config with only `beta` and `seed` replaced.
    pub fn cell_config(&self, key: CellKey) -> TrainConfig {
        let mut c = self.base_config.clone();
        c.beta = key.beta;
        c.seed = cell_seed(self.base_config.seed, key.beta, key.replica);
        c
    }
}

/// Parses `"1..100"` (inclusive), `"5"` or `"1,2,5..7"`.
pub fn parse_scales(spec: &str) -> Result<Vec<u32>> {
    let bad = || Error::Config(format!("malformed scale list {spec:?}"));
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() || out.contains(&0) || out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub beta: u32,
    pub replica: u32,
    pub seed: u64,
    pub status: CellStatus,
    /// Relative to the sweep directory.
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellRecord {
    pub fn key(&self) -> CellKey {
        CellKey::new(self.beta, self.replica)
    }
}

/// The on-disk manifest of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub scales: Vec<u32>,
    pub replicas: u32,
    #[serde(with = "crate::io::hex64")]
    pub config_fingerprint: u64,
    #[serde(with = "crate::io::hex64")]
    pub corpus_fingerprint: u64,
    pub base_config: TrainConfig,
    pub cells: Vec<CellRecord>,
}

impl SweepManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        store::write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

/// Completed (or partially completed) sweep on disk.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub dir: PathBuf,
    pub manifest: SweepManifest,
}

impl SweepResult {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let manifest = SweepManifest::load(&dir)?;
        Ok(SweepResult { dir, manifest })
    }

    pub fn cells(&self) -> &[CellRecord] {
        &self.manifest.cells
    }

    pub fn path_of(&self, key: CellKey) -> Option<PathBuf> {
        self.manifest
            .cells
            .iter()
            .find(|c| c.key() == key)
            .map(|c| self.dir.join(&c.file))
    }

    pub fn failed(&self) -> impl Iterator<Item = &CellRecord> {
        self.manifest.cells.iter().filter(|c| c.status == CellStatus::Failed)
    }
}

/// Read access to a family of embeddings indexed by `(beta, replica)`.
pub trait EmbeddingFamily {
    /// Scales in ascending order.
    fn scales(&self) -> Vec<u32>;
    fn replicas(&self) -> u32;
    /// `Ok(None)` for a cell that was never produced.
    fn fetch(&self, key: CellKey) -> Result<Option<Cow<'_, Embedding>>>;
}

impl EmbeddingFamily for SweepResult {
    fn scales(&self) -> Vec<u32> {
        self.manifest.scales.clone()
    }

    fn replicas(&self) -> u32 {
        self.manifest.replicas
    }

    fn fetch(&self, key: CellKey) -> Result<Option<Cow<'_, Embedding>>> {
        match self.manifest.cells.iter().find(|c| c.key() == key) {
            Some(c) if c.status == CellStatus::Done => {
                load_embedding(&self.dir.join(&c.file)).map(|e| Some(Cow::Owned(e)))
            }
            _ => Ok(None),
        }
    }
}

/// In-memory family, mainly for tests and small experiments.
#[derive(Debug, Clone, Default)]
pub struct MemoryFamily {
    scales: Vec<u32>,
    replicas: u32,
    cells: BTreeMap<CellKey, Embedding>,
}

impl MemoryFamily {
    pub fn new(scales: Vec<u32>, replicas: u32) -> Self {
        MemoryFamily {
            scales,
            replicas,
            cells: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: CellKey, e: Embedding) {
        self.cells.insert(key, e);
    }
}

impl EmbeddingFamily for MemoryFamily {
    fn scales(&self) -> Vec<u32> {
        self.scales.clone()
    }

    fn replicas(&self) -> u32 {
        self.replicas
    }

    fn fetch(&self, key: CellKey) -> Result<Option<Cow<'_, Embedding>>> {
        Ok(self.cells.get(&key).map(Cow::Borrowed))
    }
}

/// Event emitted as cells finish.
#[derive(Debug, Clone)]
pub enum SweepEvent<'a> {
    Skipped(&'a CellRecord),
    Finished(&'a CellRecord),
}

/// Trains every missing cell of `plan` and returns the sweep.
///
/// Cells already marked done whose file still exists are not retrained. A
/// failing cell is recorded and does not stop the others.
pub fn run_sweep(
    plan: &SweepPlan,
    ids: &[u32],
    vocab: Arc<Vocabulary>,
    on_event: Option<&(dyn Fn(SweepEvent<'_>) + Sync)>,
) -> Result<SweepResult> {
    plan.validate()?;
    if ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dir = &plan.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let config_fp = plan.base_config.fingerprint();
    let corpus_fp = ids_fingerprint(ids);
    let previous = match SweepManifest::load(dir) {
        Ok(m) => {
            if m.config_fingerprint != config_fp || m.corpus_fingerprint != corpus_fp {
                return Err(Error::Config(format!(
                    "{} holds a sweep with a different config or corpus",
                    dir.display()
                )));
            }
            Some(m)
        }
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e),
    };

    let cells: Vec<CellRecord> = plan
        .cells()
        .map(|key| {
            let seed = cell_seed(plan.base_config.seed, key.beta, key.replica);
            let file = key.file_name();
            let done_before = previous.as_ref().is_some_and(|m| {
                m.cells
                    .iter()
                    .any(|c| c.key() == key && c.status == CellStatus::Done && c.seed == seed)
            }) && dir.join(&file).is_file();
            match previous.as_ref().and_then(|m| m.cells.iter().find(|c| c.key() == key)) {
                Some(old) if done_before => old.clone(),
                _ => CellRecord {
                    beta: key.beta,
                    replica: key.replica,
                    seed,
                    status: CellStatus::Pending,
                    file,
                    wall_seconds: None,
                    final_loss: None,
                    error: None,
                },
            }
        })
        .collect();

    let manifest = Mutex::new(SweepManifest {
        scales: plan.scales.clone(),
        replicas: plan.replicas,
        config_fingerprint: config_fp,
        corpus_fingerprint: corpus_fp,
        base_config: plan.base_config.clone(),
        cells,
    });
    // Fails here, before any training, when the directory is not writable.
    manifest.lock().unwrap().save(dir)?;

    let todo: Vec<usize> = {
        let m = manifest.lock().unwrap();
        for c in m.cells.iter().filter(|c| c.status == CellStatus::Done) {
            if let Some(cb) = on_event {
                cb(SweepEvent::Skipped(c));
            }
        }
        m.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.status != CellStatus::Done)
            .map(|(i, _)| i)
            .collect()
    };

    let run_cell = |idx: usize| {
        let key = manifest.lock().unwrap().cells[idx].key();
        let config = plan.cell_config(key);
        let outcome = cbow::train(ids, vocab.clone(), &config, None).and_then(|(e, report)| {
            save_embedding(&e, &dir.join(key.file_name()), plan.include_output)?;
            Ok(report)
        });
        let mut m = manifest.lock().unwrap();
        let rec = &mut m.cells[idx];
        match outcome {
            Ok(report) => {
                rec.status = CellStatus::Done;
                rec.wall_seconds = Some(report.seconds);
                rec.final_loss = Some(report.last_iteration.mean_loss()).filter(|l| l.is_finite());
                rec.error = None;
            }
            Err(e) => {
                log::warn!("cell beta={} replica={} failed: {e}", key.beta, key.replica);
                rec.status = CellStatus::Failed;
                rec.error = Some(e.to_string());
            }
        }
        let rec = rec.clone();
        if let Err(e) = m.save(dir) {
            log::error!("could not update sweep manifest: {e}");
        }
        drop(m);
        if let Some(cb) = on_event {
            cb(SweepEvent::Finished(&rec));
        }
    };

    if plan.parallel_cells && todo.len() > 1 {
        let threads = std::thread::available_parallelism()
            .map_or(1, |n| n.get())
            .min(todo.len());
        let next = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    match todo.get(i) {
                        Some(&idx) => run_cell(idx),
                        None => break,
                    }
                });
            }
        });
    } else {
        todo.iter().for_each(|&idx| run_cell(idx));
    }

    let manifest = manifest.into_inner().unwrap();
    manifest.save(dir)?;
    Ok(SweepResult {
        dir: dir.clone(),
        manifest,
    })
}
