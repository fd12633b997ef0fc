//! Analogical reasoning: "a is to b as c is to ?" answered by 3CosAdd over
//! unit-normalized input vectors, scored per relation and traced across the
//! scale grid.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;

use crate::cbow::Embedding;
use crate::peak::peak_beta;
use crate::sweep::{CellKey, EmbeddingFamily};
use crate::{Error, Result};

/// Search-space cutoff used by default: the most frequent 30,000 words.
pub const DEFAULT_RESTRICT_K: usize = 30_000;

/// Name of the pooled curve in reports.
pub const OVERALL: &str = "overall";

/// `a : b :: c : d`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSet {
    pub name: String,
    pub questions: Vec<AnalogyQuestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuestionSuite {
    pub relations: Vec<RelationSet>,
    /// Lines that were neither a section header nor a valid question.
    pub malformed: usize,
}

impl QuestionSuite {
    pub fn question_count(&self) -> usize {
        self.relations.iter().map(|r| r.questions.len()).sum()
    }
}

/// Parses the task format: `: relation-name` opens a section, other lines
/// hold four whitespace-separated words. Words are lowercased.
pub fn load_questions<R: BufRead>(input: R) -> Result<QuestionSuite> {
    let mut suite = QuestionSuite::default();
    let mut current: Option<usize> = None;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(':') {
            let name = name.trim();
            if name.is_empty() {
                suite.malformed += 1;
                continue;
            }
            current = Some(match suite.relations.iter().position(|r| r.name == name) {
                Some(i) => i,
                None => {
                    suite.relations.push(RelationSet {
                        name: name.to_owned(),
                        questions: Vec::new(),
                    });
                    suite.relations.len() - 1
                }
            });
            continue;
        }
        let words: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
        let distinct = words.len() == 4 && (0..4).all(|i| (i + 1..4).all(|j| words[i] != words[j]));
        let Some(idx) = current.filter(|_| distinct) else {
            suite.malformed += 1;
            continue;
        };
        let mut w = words.into_iter();
        suite.relations[idx].questions.push(AnalogyQuestion {
            a: w.next().unwrap(),
            b: w.next().unwrap(),
            c: w.next().unwrap(),
            d: w.next().unwrap(),
        });
    }
    suite.relations.retain(|r| !r.questions.is_empty());
    if suite.relations.is_empty() {
        return Err(Error::Format("question file contains no valid questions".into()));
    }
    Ok(suite)
}

pub fn load_questions_file(path: &Path) -> Result<QuestionSuite> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    load_questions(BufReader::new(f))
}

/// Outcome of one question.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    /// Some word fell outside the search space.
    Skip,
    Word(u32),
}

/// Unit-normalized input vectors of the `restrict_k` most frequent words.
#[derive(Debug, Clone)]
pub struct AnalogySolver<'e> {
    embedding: &'e Embedding,
    k: usize,
    dim: usize,
    unit: Vec<f64>,
}

impl<'e> AnalogySolver<'e> {
    pub fn new(embedding: &'e Embedding, restrict_k: usize) -> Self {
        let k = restrict_k.min(embedding.len());
        let dim = embedding.dim();
        let mut unit = Vec::with_capacity(k * dim);
        for row in embedding.input().iter_rows().take(k) {
            let norm = row.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            unit.extend(row.iter().map(|&x| x as f64 * inv));
        }
        AnalogySolver {
            embedding,
            k,
            dim,
            unit,
        }
    }

    pub fn search_size(&self) -> usize {
        self.k
    }

    fn unit_row(&self, id: usize) -> &[f64] {
        &self.unit[id * self.dim..(id + 1) * self.dim]
    }

    /// Id of `word` if it lies inside the search space.
    pub fn lookup(&self, word: &str) -> Option<u32> {
        self.embedding.vocab().id(word).filter(|&id| (id as usize) < self.k)
    }

    /// The word maximizing `cos(v_w, v_b - v_a + v_c)` over the search space,
    /// excluding `a`, `b` and `c`. Ties go to the more frequent word.
    pub fn answer(&self, a: &str, b: &str, c: &str) -> Answer {
        let (Some(a), Some(b), Some(c)) = (self.lookup(a), self.lookup(b), self.lookup(c)) else {
            return Answer::Skip;
        };
        self.answer_ids(a, b, c)
    }

    pub fn answer_ids(&self, a: u32, b: u32, c: u32) -> Answer {
        let (ua, ub, uc) = (
            self.unit_row(a as usize),
            self.unit_row(b as usize),
            self.unit_row(c as usize),
        );
        let q: Vec<f64> = (0..self.dim).map(|i| ub[i] - ua[i] + uc[i]).collect();
        // ‖q‖ is common to every candidate, so ranking by v̂·q ranks by cosine.
        let mut best: Option<(u32, f64)> = None;
        for id in 0..self.k as u32 {
            if id == a || id == b || id == c {
                continue;
            }
            let s: f64 = self.unit_row(id as usize).iter().zip(&q).map(|(x, y)| x * y).sum();
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((id, s));
            }
        }
        best.map_or(Answer::Skip, |(id, _)| Answer::Word(id))
    }

    pub fn word(&self, id: u32) -> &str {
        self.embedding.vocab().word(id)
    }
}

/// One-off convenience wrapper; build an [`AnalogySolver`] for repeated use.
pub fn answer(a: &str, b: &str, c: &str, embedding: &Embedding, restrict_k: usize) -> Option<String> {
    let solver = AnalogySolver::new(embedding, restrict_k);
    match solver.answer(a, b, c) {
        Answer::Word(id) => Some(solver.word(id).to_owned()),
        Answer::Skip => None,
    }
}

/// Counts for one relation on one embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RelationScore {
    pub total: usize,
    pub answered: usize,
    pub skipped: usize,
    pub correct: usize,
}

impl RelationScore {
    /// `correct / answered`, undefined when nothing was answered.
    pub fn accuracy(&self) -> Option<f64> {
        (self.answered > 0).then(|| self.correct as f64 / self.answered as f64)
    }

    fn add(&mut self, o: &RelationScore) {
        self.total += o.total;
        self.answered += o.answered;
        self.skipped += o.skipped;
        self.correct += o.correct;
    }
}

/// Scores a relation; questions with any word outside the search space,
/// including the expected answer, are skipped.
pub fn eval_relation(relation: &RelationSet, solver: &AnalogySolver<'_>) -> RelationScore {
    let mut s = RelationScore {
        total: relation.questions.len(),
        ..Default::default()
    };
    for q in &relation.questions {
        let ids = (
            solver.lookup(&q.a),
            solver.lookup(&q.b),
            solver.lookup(&q.c),
            solver.lookup(&q.d),
        );
        let (Some(a), Some(b), Some(c), Some(d)) = ids else {
            s.skipped += 1;
            continue;
        };
        s.answered += 1;
        if solver.answer_ids(a, b, c) == Answer::Word(d) {
            s.correct += 1;
        }
    }
    s
}

/// Accuracy of one relation (or the pooled total) across the scale grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationAccuracyCurve {
    pub relation: String,
    pub betas: Vec<u32>,
    /// `per_replica[i][r]` is the score at `betas[i]`, replica `r`; `None` marks a missing cell.
    pub per_replica: Vec<Vec<Option<RelationScore>>>,
    /// Mean accuracy over the replicas where it is defined.
    pub mean: Vec<Option<f64>>,
    pub peak_beta: Option<u32>,
}

impl RelationAccuracyCurve {
    fn from_scores(relation: String, betas: Vec<u32>, per_replica: Vec<Vec<Option<RelationScore>>>) -> Self {
        let mean: Vec<Option<f64>> = per_replica
            .iter()
            .map(|reps| {
                let accs: Vec<f64> = reps.iter().flatten().filter_map(RelationScore::accuracy).collect();
                (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
            })
            .collect();
        let peak_beta = peak_beta(&betas, &mean);
        RelationAccuracyCurve {
            relation,
            betas,
            per_replica,
            mean,
            peak_beta,
        }
    }

    /// Accuracy curve of a single replica.
    pub fn replica_values(&self, replica: usize) -> Vec<Option<f64>> {
        self.per_replica
            .iter()
            .map(|reps| reps.get(replica).copied().flatten().and_then(|s| s.accuracy()))
            .collect()
    }

    pub fn replica_peak(&self, replica: usize) -> Option<u32> {
        peak_beta(&self.betas, &self.replica_values(replica))
    }

    pub fn replicas(&self) -> usize {
        self.per_replica.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub restrict_k: usize,
    pub relations: Vec<RelationAccuracyCurve>,
    /// Total correct over total answered, pooled across relations.
    pub overall: RelationAccuracyCurve,
}

impl AccuracyReport {
    pub fn relation(&self, name: &str) -> Option<&RelationAccuracyCurve> {
        self.relations.iter().find(|c| c.relation == name)
    }

    /// Long-format rows: `relation beta replica accuracy answered skipped`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "relation\tbeta\treplica\taccuracy\tanswered\tskipped")?;
        for curve in self.relations.iter().chain(std::iter::once(&self.overall)) {
            for (i, beta) in curve.betas.iter().enumerate() {
                for (r, score) in curve.per_replica[i].iter().enumerate() {
                    match score {
                        Some(s) => writeln!(
                            out,
                            "{}\t{beta}\t{r}\t{}\t{}\t{}",
                            curve.relation,
                            fmt_opt(s.accuracy()),
                            s.answered,
                            s.skipped
                        )?,
                        None => writeln!(out, "{}\t{beta}\t{r}\tmissing\t0\t0", curve.relation)?,
                    }
                }
            }
        }
        Ok(())
    }

    /// One row per relation: `relation peak_beta peak_accuracy replica_peaks`.
    pub fn write_summary_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "relation\tpeak_beta\tpeak_accuracy\treplica_peaks")?;
        for curve in self.relations.iter().chain(std::iter::once(&self.overall)) {
            let peak_acc = curve
                .peak_beta
                .and_then(|b| curve.betas.iter().position(|&x| x == b))
                .and_then(|i| curve.mean[i]);
            let reps: Vec<String> = (0..curve.replicas())
                .map(|r| curve.replica_peak(r).map_or("NA".into(), |b| b.to_string()))
                .collect();
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                curve.relation,
                curve.peak_beta.map_or("NA".into(), |b| b.to_string()),
                fmt_opt(peak_acc),
                reps.join(",")
            )?;
        }
        Ok(())
    }

    /// Per-panel structured summary: scales, mean accuracy and peak for
    /// every relation.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Panel<'a> {
            relation: &'a str,
            peak_beta: Option<u32>,
            betas: &'a [u32],
            /// NaN marks undefined accuracy.
            mean_accuracy: Vec<f64>,
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            restrict_k: usize,
            overall_peak_beta: Option<u32>,
            panels: Vec<Panel<'a>>,
        }
        let panels = self
            .relations
            .iter()
            .chain(std::iter::once(&self.overall))
            .map(|c| Panel {
                relation: &c.relation,
                peak_beta: c.peak_beta,
                betas: &c.betas,
                mean_accuracy: c.mean.iter().map(|m| m.unwrap_or(f64::NAN)).collect(),
            })
            .collect();
        toml::to_string(&Summary {
            restrict_k: self.restrict_k,
            overall_peak_beta: self.overall.peak_beta,
            panels,
        })
        .expect("summary serializes")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.6}"))
}

/// Evaluates every relation on every cell of the family.
pub fn accuracy_curves<F: EmbeddingFamily + ?Sized>(
    family: &F,
    suite: &QuestionSuite,
    restrict_k: usize,
) -> Result<AccuracyReport> {
    let betas = family.scales();
    let replicas = family.replicas() as usize;
    let nrel = suite.relations.len();
    // scores[rel][beta][replica]
    let mut scores = vec![vec![vec![None; replicas]; betas.len()]; nrel];
    let mut pooled = vec![vec![None; replicas]; betas.len()];

    for (bi, &beta) in betas.iter().enumerate() {
        for r in 0..replicas {
            let Some(e) = family.fetch(CellKey::new(beta, r as u32))? else {
                log::warn!("missing cell beta={beta} replica={r}");
                continue;
            };
            let solver = AnalogySolver::new(&e, restrict_k);
            let mut total = RelationScore::default();
            for (ri, rel) in suite.relations.iter().enumerate() {
                let s = eval_relation(rel, &solver);
                total.add(&s);
                scores[ri][bi][r] = Some(s);
            }
            pooled[bi][r] = Some(total);
        }
    }

    let relations = suite
        .relations
        .iter()
        .zip(scores)
        .map(|(rel, s)| RelationAccuracyCurve::from_scores(rel.name.clone(), betas.clone(), s))
        .collect();
    Ok(AccuracyReport {
        restrict_k,
        relations,
        overall: RelationAccuracyCurve::from_scores(OVERALL.into(), betas, pooled),
    })
}
