use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use scalevec::analogy::{accuracy_curves, load_questions_file};
use scalevec::cbow::{train, Progress};
use scalevec::corpus::{ids_fingerprint, load_token_ids, preprocess_file, save_token_ids, CorpusStats};
use scalevec::neighbors::{
    build_catalog, detect_crossovers, write_crossovers_tsv, write_curves_tsv, write_peaks_tsv, NeighborCatalog,
    PeakScaleHistogram,
};
use scalevec::sweep::{export_reference, import_reference, load_embedding, save_embedding, EMBEDDING_MAGIC};
use scalevec::sweep::{parse_scales, run_sweep, SweepEvent};
use scalevec::{EmbeddingFamily, SweepPlan, SweepResult, TrainConfig, Vocabulary};

use crate::manifest::{now, snapshot, CommandRecord, RunManifest};
use crate::{Cli, Command, Format};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const TOKENS_FILE: &str = "tokens.bin";
pub const STATS_FILE: &str = "corpus.toml";

pub fn run(cli: Cli) -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let started = now();
    let root = cli.out_root.clone();
    let out_or = |out: Option<PathBuf>, default: &str| -> Result<PathBuf> {
        match (out, &root) {
            (Some(p), _) => Ok(p),
            (None, Some(r)) => Ok(r.join(default)),
            (None, None) => bail!("no output location: pass --out or set SCALEVEC_OUT"),
        }
    };

    let (name, dir, done) = match cli.command {
        Command::Preprocess { input, out, min_count } => {
            let out = out_or(out, "corpus")?;
            ("preprocess", out.clone(), preprocess(&input, &out, min_count)?)
        }
        Command::Train {
            corpus,
            flags,
            out,
            with_output,
        } => {
            let config = flags.resolve(&flags.file()?, true)?;
            let out = out_or(out, &format!("beta{}_seed{}.stv", config.beta, config.seed))?;
            let done = train_one(&corpus, config, &out, with_output)?;
            ("train", parent_dir(&out), done)
        }
        Command::Sweep {
            corpus,
            flags,
            scales,
            replicas,
            parallel_cells,
            with_output,
            out,
        } => {
            let out = out_or(out, "sweep")?;
            let file = flags.file()?;
            let base = flags.resolve(&file, false)?;
            let scales = scales
                .or(file.scales.clone())
                .context("scales are required: pass --scales or set them in the config file")?;
            let replicas = replicas.or(file.replicas).unwrap_or(1);
            let mut plan = SweepPlan::new(parse_scales(&scales)?, replicas, base, &out);
            plan.parallel_cells = parallel_cells;
            plan.include_output = with_output;
            ("sweep", out, sweep(&corpus, &plan, &scales)?)
        }
        Command::EvalAnalogy {
            sweep,
            questions,
            restrict_k,
            out,
        } => {
            let out = out_or(out, "analogy")?;
            (
                "eval-analogy",
                out.clone(),
                eval_analogy(&sweep, &questions, restrict_k, &out)?,
            )
        }
        Command::Neighbors {
            sweep,
            center,
            n,
            crossover_n,
            out,
        } => {
            let out = out_or(out, "neighbors")?;
            (
                "neighbors",
                out.clone(),
                neighbors(&sweep, &center, &n, crossover_n, &out)?,
            )
        }
        Command::Export { input, output, to } => {
            let done = export(&input, &output, to)?;
            ("export", parent_dir(&output), done)
        }
    };

    let record = CommandRecord {
        command: name.into(),
        args,
        started,
        finished: now(),
        config: done.config,
        outputs: done.outputs,
    };
    let path = RunManifest::append(&dir, done.corpus_fingerprint, record)?;
    log::info!("manifest {}", path.display());
    match done.failure {
        Some(f) => bail!(f),
        None => Ok(()),
    }
}

/// What a command produced, for the run manifest.
struct Done {
    config: toml::Table,
    corpus_fingerprint: Option<u64>,
    outputs: Vec<PathBuf>,
    /// Partial failure: recorded in the manifest, then reported as an error.
    failure: Option<String>,
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn preprocess(input: &Path, out: &Path, min_count: u64) -> Result<Done> {
    if !input.is_file() {
        bail!("input {} does not exist or is not a file", input.display());
    }
    let (vocab, ids, stats) = preprocess_file(input, min_count)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let vocab_path = out.join(VOCAB_FILE);
    let tokens_path = out.join(TOKENS_FILE);
    let stats_path = out.join(STATS_FILE);
    vocab.save(&vocab_path)?;
    save_token_ids(&tokens_path, &ids)?;
    fs::write(&stats_path, toml::to_string(&stats)?)?;

    println!("tokens\t{}", stats.raw_tokens);
    println!("distinct\t{}", stats.distinct_words);
    println!("retained\t{}", stats.retained_words);
    println!("encoded\t{}", stats.encoded_tokens);
    if stats.invalid_bytes > 0 {
        log::warn!("{} invalid UTF-8 bytes treated as word breaks", stats.invalid_bytes);
    }

    #[derive(Serialize)]
    struct Snapshot<'a> {
        input: &'a Path,
        min_count: u64,
    }
    Ok(Done {
        config: snapshot(&Snapshot { input, min_count })?,
        corpus_fingerprint: Some(stats.fingerprint),
        outputs: vec![vocab_path, tokens_path, stats_path],
        failure: None,
    })
}

fn load_corpus(dir: &Path) -> Result<(Arc<Vocabulary>, Vec<u32>)> {
    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))
        .with_context(|| format!("{} is not a preprocessed corpus directory", dir.display()))?;
    let ids = load_token_ids(&dir.join(TOKENS_FILE))?;
    if let Ok(text) = fs::read_to_string(dir.join(STATS_FILE)) {
        let stats: CorpusStats = toml::from_str(&text).context("reading corpus stats")?;
        if stats.fingerprint != ids_fingerprint(&ids) {
            bail!("token ids in {} do not match {STATS_FILE}", dir.display());
        }
    }
    Ok((Arc::new(vocab), ids))
}

#[derive(Serialize)]
struct TrainSnapshot<'a> {
    corpus: &'a Path,
    with_output: bool,
    train: &'a TrainConfig,
}

fn train_one(corpus: &Path, config: TrainConfig, out: &Path, with_output: bool) -> Result<Done> {
    let (vocab, ids) = load_corpus(corpus)?;
    fs::create_dir_all(parent_dir(out))?;
    log::info!(
        "training beta={} dim={} on {} tokens, {} words",
        config.beta,
        config.dim,
        ids.len(),
        vocab.len()
    );
    let progress = |p: &Progress| {
        log::debug!(
            "{:.1}% alpha {:.5} loss {:.4}",
            100.0 * p.processed as f64 / p.total as f64,
            p.alpha,
            p.mean_loss
        );
    };
    let (embedding, report) = train(&ids, vocab, &config, Some(&progress))?;
    save_embedding(&embedding, out, with_output)?;
    println!("final_loss\t{:.6}", report.last_iteration.mean_loss());
    println!("seconds\t{:.2}", report.seconds);
    println!("embedding\t{}", out.display());
    Ok(Done {
        config: snapshot(&TrainSnapshot {
            corpus,
            with_output,
            train: &config,
        })?,
        corpus_fingerprint: Some(ids_fingerprint(&ids)),
        outputs: vec![out.to_path_buf()],
        failure: None,
    })
}

fn sweep(corpus: &Path, plan: &SweepPlan, scales: &str) -> Result<Done> {
    let (vocab, ids) = load_corpus(corpus)?;
    let total = plan.scales.len() * plan.replicas as usize;
    log::info!("sweep of {total} cells into {}", plan.out_dir.display());
    let on_event = |e: SweepEvent<'_>| match e {
        SweepEvent::Skipped(c) => log::info!("beta={} replica={} already done", c.beta, c.replica),
        SweepEvent::Finished(c) => match &c.error {
            Some(err) => log::error!("beta={} replica={} failed: {err}", c.beta, c.replica),
            None => log::info!(
                "beta={} replica={} done in {:.1}s",
                c.beta,
                c.replica,
                c.wall_seconds.unwrap_or(0.0)
            ),
        },
    };
    let result = run_sweep(plan, &ids, vocab, Some(&on_event))?;
    let failed = result.failed().count();
    println!("cells\t{}", result.cells().len());
    println!("failed\t{failed}");
    println!(
        "manifest\t{}",
        plan.out_dir.join(scalevec::sweep::MANIFEST_FILE).display()
    );

    #[derive(Serialize)]
    struct Snapshot<'a> {
        corpus: &'a Path,
        scales: &'a str,
        replicas: u32,
        parallel_cells: bool,
        with_output: bool,
        train: &'a TrainConfig,
    }
    let mut outputs = vec![plan.out_dir.join(scalevec::sweep::MANIFEST_FILE)];
    outputs.extend(result.cells().iter().filter_map(|c| result.path_of(c.key())));
    Ok(Done {
        config: snapshot(&Snapshot {
            corpus,
            scales,
            replicas: plan.replicas,
            parallel_cells: plan.parallel_cells,
            with_output: plan.include_output,
            train: &plan.base_config,
        })?,
        corpus_fingerprint: Some(ids_fingerprint(&ids)),
        outputs,
        failure: (failed > 0)
            .then(|| format!("{failed} of {} cells failed; rerun to retry them", result.cells().len())),
    })
}

fn eval_analogy(sweep: &Path, questions: &Path, restrict_k: usize, out: &Path) -> Result<Done> {
    let suite = load_questions_file(questions)?;
    if suite.malformed > 0 {
        log::warn!("{} malformed question lines ignored", suite.malformed);
    }
    let family = SweepResult::open(sweep)?;
    let report = accuracy_curves(&family, &suite, restrict_k)?;
    fs::create_dir_all(out)?;
    let long = out.join("analogy.tsv");
    let summary = out.join("analogy_summary.tsv");
    let panels = out.join("analogy.toml");
    let mut w = create(&long)?;
    report.write_tsv(&mut w)?;
    w.flush()?;
    let mut w = create(&summary)?;
    report.write_summary_tsv(&mut w)?;
    w.flush()?;
    fs::write(&panels, report.to_toml())?;
    for c in report.relations.iter().chain(std::iter::once(&report.overall)) {
        println!("{}\t{}", c.relation, c.peak_beta.map_or("NA".into(), |b| b.to_string()));
    }

    #[derive(Serialize)]
    struct Snapshot<'a> {
        sweep: &'a Path,
        questions: &'a Path,
        restrict_k: usize,
    }
    Ok(Done {
        config: snapshot(&Snapshot {
            sweep,
            questions,
            restrict_k,
        })?,
        corpus_fingerprint: Some(family.manifest.corpus_fingerprint),
        outputs: vec![long, summary, panels],
        failure: None,
    })
}

fn neighbors(
    sweep: &Path,
    centers: &[String],
    sizes: &[usize],
    crossover_n: Option<usize>,
    out: &Path,
) -> Result<Done> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() || sizes[0] == 0 {
        bail!("catalog sizes must be positive");
    }
    let largest = *sizes.last().unwrap();
    let crossover_n = crossover_n.unwrap_or(sizes[0]);
    if !sizes.contains(&crossover_n) {
        bail!("--crossover-n {crossover_n} is not one of the catalog sizes");
    }
    let family = SweepResult::open(sweep)?;
    let betas = family.scales();
    fs::create_dir_all(out)?;

    let catalog_path = out.join("catalog.tsv");
    let curves_path = out.join("curves.tsv");
    let peaks_path = out.join("peaks.tsv");
    let crossings_path = out.join("crossovers.tsv");
    let hist_paths: Vec<PathBuf> = sizes.iter().map(|n| out.join(format!("histogram_n{n}.tsv"))).collect();

    let mut catalogs = Vec::new();
    let mut curves = Vec::new();
    let mut events = Vec::new();
    let mut hists: Vec<Vec<PeakScaleHistogram>> = vec![Vec::new(); sizes.len()];
    for center in centers {
        // smaller catalogs are prefixes of the largest one
        let full = build_catalog(center, &family, largest)?;
        if full.is_empty() {
            bail!("no trained cells in {}", sweep.display());
        }
        let (_, center_curves) = scalevec::neighbors::peak_histogram(&full, &family)?;
        for (i, &n) in sizes.iter().enumerate() {
            let cat = NeighborCatalog::from_lists(
                center,
                n,
                full.per_scale
                    .iter()
                    .map(|(b, l)| (*b, l[..n.min(l.len())].to_vec()))
                    .collect(),
            );
            let members: Vec<_> = center_curves
                .iter()
                .filter(|c| cat.union.contains(&c.neighbor))
                .collect();
            hists[i].push(PeakScaleHistogram::from_peaks(
                center,
                betas.clone(),
                members.iter().map(|c| c.peak_beta),
            )?);
            if n == crossover_n {
                let owned: Vec<_> = members.into_iter().cloned().collect();
                events.extend(detect_crossovers(&owned)?);
            }
            catalogs.push(cat);
        }
        curves.extend(center_curves);
    }

    let mut w = create(&catalog_path)?;
    for (i, cat) in catalogs.iter().enumerate() {
        cat.write_tsv(&mut w, i == 0)?;
    }
    w.flush()?;
    for (hs, path) in hists.iter().zip(&hist_paths) {
        let mut w = create(path)?;
        for (i, h) in hs.iter().enumerate() {
            h.write_tsv(&mut w, i == 0)?;
        }
        w.flush()?;
    }
    let mut w = create(&curves_path)?;
    write_curves_tsv(&curves, &mut w)?;
    w.flush()?;
    let mut w = create(&peaks_path)?;
    write_peaks_tsv(&curves, &mut w)?;
    w.flush()?;
    let mut w = create(&crossings_path)?;
    write_crossovers_tsv(&events, &mut w)?;
    w.flush()?;

    for cat in &catalogs {
        println!("{}\tn={}\tunion={}", cat.center, cat.n, cat.len());
    }
    println!("crossovers\t{}", events.len());

    #[derive(Serialize)]
    struct Snapshot<'a> {
        sweep: &'a Path,
        centers: &'a [String],
        sizes: &'a [usize],
        crossover_n: usize,
    }
    let mut outputs = vec![catalog_path, curves_path, peaks_path, crossings_path];
    outputs.extend(hist_paths);
    Ok(Done {
        config: snapshot(&Snapshot {
            sweep,
            centers,
            sizes: &sizes,
            crossover_n,
        })?,
        corpus_fingerprint: Some(family.manifest.corpus_fingerprint),
        outputs,
        failure: None,
    })
}

fn is_native(path: &Path) -> Result<bool> {
    let mut head = [0u8; 8];
    let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let n = f.read(&mut head)?;
    Ok(n == head.len() && &head == EMBEDDING_MAGIC)
}

fn export(input: &Path, output: &Path, to: Option<Format>) -> Result<Done> {
    let from = if is_native(input)? {
        Format::Native
    } else {
        Format::Reference
    };
    let to = to.unwrap_or(match from {
        Format::Native => Format::Reference,
        Format::Reference => Format::Native,
    });
    let embedding = match from {
        Format::Native => load_embedding(input)?,
        Format::Reference => import_reference(input)?,
    };
    match to {
        Format::Native => save_embedding(&embedding, output, embedding.output().is_some())?,
        Format::Reference => export_reference(&embedding, output)?,
    }
    println!(
        "{}\t{} words\t{} dims",
        output.display(),
        embedding.len(),
        embedding.dim()
    );

    #[derive(Serialize)]
    struct Snapshot<'a> {
        input: &'a Path,
        from: &'a str,
        to: &'a str,
    }
    let name = |f: Format| match f {
        Format::Native => "native",
        Format::Reference => "reference",
    };
    Ok(Done {
        config: snapshot(&Snapshot {
            input,
            from: name(from),
            to: name(to),
        })?,
        corpus_fingerprint: embedding.meta().map(|m| m.corpus_fingerprint),
        outputs: vec![output.to_path_buf()],
        failure: None,
    })
}
