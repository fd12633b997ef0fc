//! Neighborhood structure across scales: similarity curves between a center
//! word and its neighbors, ordering crossovers, neighbor catalogs and the
//! distribution of peak-similarity scales.
//!
//! Similarities are cosines of raw input vectors. Replicas at one scale are
//! averaged before peaks are located; per-replica values are kept for
//! dispersion.

use std::collections::HashSet;
use std::io::Write;

use serde::Serialize;

use crate::cbow::Embedding;
use crate::peak::peak_beta;
use crate::sweep::{CellKey, EmbeddingFamily};
use crate::{Error, Result};

/// Catalog cutoffs used for robustness checks.
pub const CATALOG_SIZES: [usize; 5] = [5, 10, 20, 50, 100];

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

/// `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::contract(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::contract("cosine of a zero vector"));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub word: String,
    pub id: u32,
    pub similarity: f64,
}

/// Cosine of `center` with every word, averaged over `replicas` (which must
/// share one vocabulary). Zero vectors score 0.
fn mean_similarities(center: &str, replicas: &[&Embedding]) -> Result<(u32, Vec<f64>)> {
    let first = replicas
        .first()
        .ok_or_else(|| Error::contract("no embeddings to rank neighbors in"))?;
    let vocab = first.vocab();
    let c = vocab.id(center).ok_or_else(|| Error::UnknownWord(center.to_owned()))?;
    let mut sums = vec![0.0; vocab.len()];
    for e in replicas {
        if e.vocab().words() != vocab.words() {
            return Err(Error::contract("replicas disagree on the vocabulary"));
        }
        let cv = e.input().row(c as usize);
        let cn = norm(cv);
        if cn == 0.0 {
            return Err(Error::contract(format!("{center:?} has a zero vector")));
        }
        for (s, row) in sums.iter_mut().zip(e.input().iter_rows()) {
            let rn = norm(row);
            if rn > 0.0 {
                *s += (dot(cv, row) / (cn * rn)).clamp(-1.0, 1.0);
            }
        }
    }
    let k = replicas.len() as f64;
    sums.iter_mut().for_each(|s| *s /= k);
    Ok((c, sums))
}

fn rank(center_id: u32, sims: &[f64], n: usize, embedding: &Embedding) -> Vec<Neighbor> {
    let mut ids: Vec<u32> = (0..sims.len() as u32).filter(|&i| i != center_id).collect();
    ids.sort_by(|&a, &b| sims[b as usize].total_cmp(&sims[a as usize]).then(a.cmp(&b)));
    ids.truncate(n);
    ids.into_iter()
        .map(|id| Neighbor {
            word: embedding.vocab().word(id).to_owned(),
            id,
            similarity: sims[id as usize],
        })
        .collect()
}

/// The `n` words most similar to `center` (fewer if the vocabulary is
/// smaller), descending; ties go to the lower vocabulary id.
pub fn top_n(center: &str, embedding: &Embedding, n: usize) -> Result<Vec<Neighbor>> {
    top_n_averaged(center, &[embedding], n)
}

/// [`top_n`] ranked by similarity averaged over replicas.
pub fn top_n_averaged(center: &str, replicas: &[&Embedding], n: usize) -> Result<Vec<Neighbor>> {
    if n == 0 {
        return Err(Error::contract("top_n needs n >= 1"));
    }
    let (c, sims) = mean_similarities(center, replicas)?;
    Ok(rank(c, &sims, n, replicas[0]))
}

/// Similarity between a center word and one neighbor across the scale grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityCurve {
    pub center: String,
    pub neighbor: String,
    pub betas: Vec<u32>,
    /// `per_replica[i][r]`; `None` where the cell or a word is missing.
    pub per_replica: Vec<Vec<Option<f64>>>,
    pub mean: Vec<Option<f64>>,
    /// Population standard deviation over the available replicas.
    pub stddev: Vec<Option<f64>>,
    pub peak_beta: Option<u32>,
}

impl SimilarityCurve {
    pub fn from_replicas(center: &str, neighbor: &str, betas: Vec<u32>, per_replica: Vec<Vec<Option<f64>>>) -> Self {
        let (mean, stddev): (Vec<_>, Vec<_>) = per_replica
            .iter()
            .map(|reps| {
                let vals: Vec<f64> = reps.iter().flatten().copied().collect();
                if vals.is_empty() {
                    return (None, None);
                }
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
                (Some(m), Some(var.sqrt()))
            })
            .unzip();
        let peak_beta = peak_beta(&betas, &mean);
        SimilarityCurve {
            center: center.to_owned(),
            neighbor: neighbor.to_owned(),
            betas,
            per_replica,
            mean,
            stddev,
            peak_beta,
        }
    }

    /// Curve with one replica per scale, e.g. hand-made fixtures.
    pub fn from_values(center: &str, neighbor: &str, betas: Vec<u32>, values: Vec<f64>) -> Self {
        let per_replica = values.into_iter().map(|v| vec![Some(v)]).collect();
        Self::from_replicas(center, neighbor, betas, per_replica)
    }

    pub fn replica_peak(&self, replica: usize) -> Option<u32> {
        let vals: Vec<Option<f64>> = self
            .per_replica
            .iter()
            .map(|reps| reps.get(replica).copied().flatten())
            .collect();
        peak_beta(&self.betas, &vals)
    }

    /// Scales with no value at all.
    pub fn gaps(&self) -> Vec<u32> {
        self.betas
            .iter()
            .zip(&self.mean)
            .filter(|(_, m)| m.is_none())
            .map(|(&b, _)| b)
            .collect()
    }
}

/// Similarity curves of `center` against each of `neighbors`.
///
/// Words missing from some cells leave gaps; a neighbor (or the center)
/// missing from every cell is an error.
pub fn similarity_curves<F: EmbeddingFamily + ?Sized>(
    center: &str,
    neighbors: &[String],
    family: &F,
) -> Result<Vec<SimilarityCurve>> {
    let betas = family.scales();
    let replicas = family.replicas() as usize;
    // values[neighbor][beta][replica]
    let mut values = vec![vec![vec![None; replicas]; betas.len()]; neighbors.len()];
    let mut center_seen = false;
    let mut seen = vec![false; neighbors.len()];

    for (bi, &beta) in betas.iter().enumerate() {
        for r in 0..replicas as u32 {
            let Some(e) = family.fetch(CellKey::new(beta, r))? else {
                continue;
            };
            let Some(cv) = e.vector(center) else { continue };
            center_seen = true;
            for (ni, word) in neighbors.iter().enumerate() {
                if let Some(nv) = e.vector(word) {
                    seen[ni] = true;
                    values[ni][bi][r as usize] = cosine(cv, nv).ok();
                }
            }
        }
    }
    if !center_seen {
        return Err(Error::UnknownWord(center.to_owned()));
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::UnknownWord(neighbors[i].clone()));
    }
    Ok(neighbors
        .iter()
        .zip(values)
        .map(|(w, v)| SimilarityCurve::from_replicas(center, w, betas.clone(), v))
        .collect())
}

/// Interval of the grid where two neighbors swap order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossoverEvent {
    pub center: String,
    pub first: String,
    pub second: String,
    pub beta_lo: u32,
    pub beta_hi: u32,
}

/// Every grid interval where `sim(x) - sim(y)` changes strict sign, for every
/// unordered pair of curves. A run of exact zeros is attributed to the
/// interval ending at its first zero; touching without changing sign is not
/// a crossover. Scales where either curve has a gap are skipped over.
pub fn detect_crossovers(curves: &[SimilarityCurve]) -> Result<Vec<CrossoverEvent>> {
    let Some(first) = curves.first() else {
        return Ok(Vec::new());
    };
    for c in curves {
        if c.betas != first.betas {
            return Err(Error::contract("crossover detection needs curves on one scale grid"));
        }
        if c.center != first.center {
            return Err(Error::contract("crossover detection needs curves of one center word"));
        }
    }
    let betas = &first.betas;
    let mut events = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let diffs: Vec<(usize, f64)> = curves[i]
                .mean
                .iter()
                .zip(&curves[j].mean)
                .enumerate()
                .filter_map(|(k, (a, b))| Some((k, (*a)? - (*b)?)))
                .collect();
            // (index of last nonzero difference, its sign)
            let mut last: Option<(usize, f64)> = None;
            let mut first_zero: Option<usize> = None;
            for &(k, d) in &diffs {
                if d == 0.0 {
                    if last.is_some() && first_zero.is_none() {
                        first_zero = Some(k);
                    }
                    continue;
                }
                if let Some((lk, ld)) = last {
                    if ld.signum() != d.signum() {
                        let hi = first_zero.unwrap_or(k);
                        let lo = diffs.iter().rev().find(|(x, _)| *x < hi).map_or(lk, |(x, _)| *x);
                        events.push(CrossoverEvent {
                            center: first.center.clone(),
                            first: curves[i].neighbor.clone(),
                            second: curves[j].neighbor.clone(),
                            beta_lo: betas[lo],
                            beta_hi: betas[hi],
                        });
                    }
                }
                last = Some((k, d));
                first_zero = None;
            }
        }
    }
    Ok(events)
}

/// Union of the top-N neighbors of a center word over every scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborCatalog {
    pub center: String,
    pub n: usize,
    /// Top-N list per available scale, ascending in beta.
    pub per_scale: Vec<(u32, Vec<Neighbor>)>,
    /// Unique neighbors in order of first appearance.
    pub union: Vec<String>,
}

impl NeighborCatalog {
    pub fn len(&self) -> usize {
        self.union.len()
    }

    pub fn is_empty(&self) -> bool {
        self.union.is_empty()
    }

    pub fn from_lists(center: &str, n: usize, per_scale: Vec<(u32, Vec<Neighbor>)>) -> Self {
        let mut seen = HashSet::new();
        let union = per_scale
            .iter()
            .flat_map(|(_, list)| list.iter())
            .filter(|nb| seen.insert(nb.word.clone()))
            .map(|nb| nb.word.clone())
            .collect();
        NeighborCatalog {
            center: center.to_owned(),
            n,
            per_scale,
            union,
        }
    }

    /// Rows `center n beta rank neighbor similarity`.
    pub fn write_tsv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "center\tn\tbeta\trank\tneighbor\tsimilarity")?;
        }
        for (beta, list) in &self.per_scale {
            for (rank, nb) in list.iter().enumerate() {
                writeln!(
                    out,
                    "{}\t{}\t{beta}\t{}\t{}\t{:.6}",
                    self.center,
                    self.n,
                    rank + 1,
                    nb.word,
                    nb.similarity
                )?;
            }
        }
        Ok(())
    }
}

/// Top-N lists at every scale (replica-averaged) and their union.
pub fn build_catalog<F: EmbeddingFamily + ?Sized>(center: &str, family: &F, n: usize) -> Result<NeighborCatalog> {
    let mut per_scale = Vec::new();
    for beta in family.scales() {
        let cells = (0..family.replicas())
            .map(|r| family.fetch(CellKey::new(beta, r)))
            .collect::<Result<Vec<_>>>()?;
        let present: Vec<&Embedding> = cells.iter().flatten().map(|c| c.as_ref()).collect();
        if present.is_empty() {
            log::warn!("no embeddings at beta={beta}; catalog skips it");
            continue;
        }
        per_scale.push((beta, top_n_averaged(center, &present, n)?));
    }
    Ok(NeighborCatalog::from_lists(center, n, per_scale))
}

/// Normalized distribution of the scales at which catalog members peak.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakScaleHistogram {
    pub center: String,
    pub betas: Vec<u32>,
    pub counts: Vec<usize>,
    pub fractions: Vec<f64>,
}

impl PeakScaleHistogram {
    /// Bins one peak scale per member; members without a peak are ignored.
    pub fn from_peaks(center: &str, betas: Vec<u32>, peaks: impl IntoIterator<Item = Option<u32>>) -> Result<Self> {
        let mut counts = vec![0usize; betas.len()];
        for p in peaks.into_iter().flatten() {
            let i = betas
                .iter()
                .position(|&b| b == p)
                .ok_or_else(|| Error::contract(format!("peak scale {p} is not on the grid")))?;
            counts[i] += 1;
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::contract("peak histogram of an empty catalog"));
        }
        let fractions = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(PeakScaleHistogram {
            center: center.to_owned(),
            betas,
            counts,
            fractions,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Nonzero bins only: `center beta fraction count`.
    pub fn write_tsv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "center\tbeta\tfraction\tcount")?;
        }
        for ((b, f), c) in self.betas.iter().zip(&self.fractions).zip(&self.counts) {
            if *c > 0 {
                writeln!(out, "{}\t{b}\t{f:.9}\t{c}", self.center)?;
            }
        }
        Ok(())
    }
}

/// Similarity curves for every catalog member, binned at their peak scale.
pub fn peak_histogram<F: EmbeddingFamily + ?Sized>(
    catalog: &NeighborCatalog,
    family: &F,
) -> Result<(PeakScaleHistogram, Vec<SimilarityCurve>)> {
    if catalog.is_empty() {
        return Err(Error::contract("peak histogram of an empty catalog"));
    }
    let curves = similarity_curves(&catalog.center, &catalog.union, family)?;
    let hist = PeakScaleHistogram::from_peaks(&catalog.center, family.scales(), curves.iter().map(|c| c.peak_beta))?;
    Ok((hist, curves))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.6}"))
}

/// Rows `center neighbor beta mean_sim stddev`.
pub fn write_curves_tsv<W: Write>(curves: &[SimilarityCurve], mut out: W) -> std::io::Result<()> {
    writeln!(out, "center\tneighbor\tbeta\tmean_sim\tstddev")?;
    for c in curves {
        for ((b, m), s) in c.betas.iter().zip(&c.mean).zip(&c.stddev) {
            writeln!(
                out,
                "{}\t{}\t{b}\t{}\t{}",
                c.center,
                c.neighbor,
                fmt_opt(*m),
                fmt_opt(*s)
            )?;
        }
    }
    Ok(())
}

/// Rows `center neighbor peak_beta replica_peaks`.
pub fn write_peaks_tsv<W: Write>(curves: &[SimilarityCurve], mut out: W) -> std::io::Result<()> {
    writeln!(out, "center\tneighbor\tpeak_beta\treplica_peaks")?;
    for c in curves {
        let reps: Vec<String> = (0..c.per_replica.first().map_or(0, Vec::len))
            .map(|r| c.replica_peak(r).map_or("NA".into(), |b| b.to_string()))
            .collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            c.center,
            c.neighbor,
            c.peak_beta.map_or("NA".into(), |b| b.to_string()),
            reps.join(",")
        )?;
    }
    Ok(())
}

/// Rows `center word1 word2 beta_lo beta_hi`.
pub fn write_crossovers_tsv<W: Write>(events: &[CrossoverEvent], mut out: W) -> std::io::Result<()> {
    writeln!(out, "center\tword1\tword2\tbeta_lo\tbeta_hi")?;
    for e in events {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            e.center, e.first, e.second, e.beta_lo, e.beta_hi
        )?;
    }
    Ok(())
}
