//! Run configuration and the drivers behind the `hybrid-dp` subcommands.

mod config;

pub use config::{parse_config_file, Algorithm, RunConfig, KEYS};

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::seq::SliceRandom;

use crate::corpus::{parse_uci_bagofwords, split_train_test, Corpus};
use crate::dpmm::{cgs_sweep, hcvb0_sweep, tcvb0_sweep, DpmmHyper, DpmmState};
use crate::eval::{
    heldout_mixed_membership, heldout_single_membership, split_heldout, HeldOut, MetricsRecord, MetricsWriter,
};
use crate::hdplda::{minibatch_step, HdpState, StochasticMode};
use crate::snapshot::{read_snapshot, write_snapshot, Snapshot};
use crate::{seeded_rng, Error};

/// Environment variable naming the root directory for run outputs.
pub const OUT_ROOT_ENV: &str = "HYBRID_DP_OUT";
pub const DEFAULT_OUT_ROOT: &str = "runs";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CORPUS: i32 = 3;

/// A failed command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(Error),
    #[error("corpus: {0}")]
    Corpus(Error),
    #[error(transparent)]
    Other(#[from] Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Corpus(_) => EXIT_CORPUS,
            RunError::Other(_) => EXIT_FAILURE,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Other(e.into())
    }
}

/// Output root from [`OUT_ROOT_ENV`], or `runs`.
pub fn out_root_from_env() -> PathBuf {
    std::env::var_os(OUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

/// Reads a UCI corpus (and optional vocabulary) from disk.
pub fn load_corpus(docword: &Path, vocab: Option<&Path>) -> Result<Corpus, RunError> {
    let open = |p: &Path| {
        File::open(p)
            .map(BufReader::new)
            .map_err(|e| RunError::Corpus(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))))
    };
    let docs = open(docword)?;
    let vocab = vocab.map(open).transpose()?;
    let (corpus, warnings) = parse_uci_bagofwords(docs, vocab).map_err(RunError::Corpus)?;
    if warnings.dropped_empty_docs > 0 {
        log::info!("{} empty documents dropped", warnings.dropped_empty_docs);
    }
    if corpus.is_empty() {
        return Err(RunError::Corpus(Error::arg("corpus has no non-empty documents")));
    }
    Ok(corpus)
}

enum Engine {
    Batch { state: DpmmState, hyper: DpmmHyper },
    Stochastic {
        state: HdpState,
        mode: StochasticMode,
        train: Corpus,
        order: Vec<usize>,
        cursor: usize,
    },
}

/// Trains the configured engine on `train`, scoring `heldout` every
/// `eval_every` iterations and after the last one. Each record is passed to
/// `on_record` as soon as it exists.
pub fn run_engine(
    config: &RunConfig,
    run_id: &str,
    train: Corpus,
    heldout: &HeldOut,
    mut on_record: impl FnMut(&MetricsRecord) -> Result<(), Error>,
) -> Result<(Snapshot, Vec<MetricsRecord>), Error> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed ^ 0x5EED_0FE4_614E);
    let v = train.vocab_size;
    let n_train = train.len() as u64;
    let hdp_hyper = config.hdp_hyper();

    let mut engine = match config.algorithm {
        Algorithm::Hcvb0 => Engine::Batch {
            state: DpmmState::empty(train),
            hyper: DpmmHyper::new(config.alpha, config.beta, v)?,
        },
        Algorithm::Cgs => Engine::Batch {
            state: DpmmState::empty_hard(train),
            hyper: DpmmHyper::new(config.alpha, config.beta, v)?,
        },
        Algorithm::Tcvb0 => Engine::Batch {
            state: DpmmState::truncated(train, config.truncation.unwrap_or(40), &mut rng)?,
            hyper: DpmmHyper::new(config.alpha, config.beta, v)?,
        },
        algo => {
            let mode = match algo {
                Algorithm::Hcsvb0 => StochasticMode::Hybrid,
                Algorithm::Scvb0 => StochasticMode::Scvb0,
                _ => StochasticMode::Pcsvb0,
            };
            let state = match mode {
                StochasticMode::Hybrid => HdpState::empty(v, train.len()),
                _ => HdpState::finite(v, train.len(), config.truncation.unwrap_or(40), mode, &hdp_hyper, &mut rng)?,
            };
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(&mut rng);
            Engine::Stochastic {
                state,
                mode,
                train,
                order,
                cursor: 0,
            }
        }
    };

    let iterations = if config.algorithm.is_stochastic() {
        config.steps
    } else {
        config.sweeps
    };
    let mut records = Vec::new();
    let mut elapsed = Duration::ZERO;
    let mut docs_processed = 0u64;

    for it in 1..=iterations {
        match &mut engine {
            Engine::Batch { state, hyper } => {
                let report = match config.algorithm {
                    Algorithm::Hcvb0 => hcvb0_sweep(state, hyper, config.prune_threshold, &mut rng)?,
                    Algorithm::Cgs => cgs_sweep(state, hyper, config.prune_threshold, &mut rng)?,
                    _ => tcvb0_sweep(state, hyper, &mut rng)?,
                };
                elapsed += report.elapsed;
                docs_processed += n_train;
            }
            Engine::Stochastic {
                state,
                mode,
                train,
                order,
                cursor,
            } => {
                let mut batch = Vec::with_capacity(config.batch_size);
                while batch.len() < config.batch_size.min(train.len()) {
                    if *cursor == order.len() {
                        order.shuffle(&mut rng);
                        *cursor = 0;
                    }
                    batch.push(train.docs[order[*cursor]].clone());
                    *cursor += 1;
                }
                let report = minibatch_step(state, &batch, &hdp_hyper, *mode, &mut rng)?;
                elapsed += report.elapsed;
                docs_processed += batch.len() as u64;
            }
        }

        if it % config.eval_every == 0 || it == iterations {
            let (k, perplexity) = match &engine {
                Engine::Batch { state, hyper } => (
                    state.k(),
                    heldout_single_membership(&state.model(hyper), heldout)?.perplexity,
                ),
                Engine::Stochastic { state, .. } => {
                    (state.k(), heldout_mixed_membership(state, &hdp_hyper, heldout)?.perplexity)
                }
            };
            let record = MetricsRecord {
                run_id: run_id.to_string(),
                algorithm: config.algorithm.to_string(),
                iteration: it,
                docs_processed,
                wall_clock_s: if config.timing { elapsed.as_secs_f64() } else { 0.0 },
                k,
                heldout_perplexity: perplexity,
                seed: config.seed,
            };
            on_record(&record)?;
            records.push(record);
        }
    }

    let snapshot = match engine {
        Engine::Batch { state, hyper } => Snapshot::Dpmm(state.model(&hyper)),
        Engine::Stochastic { state, .. } => Snapshot::Hdp {
            state,
            hyper: hdp_hyper,
        },
    };
    Ok((snapshot, records))
}

/// Where a finished run wrote its files.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub snapshot: PathBuf,
    pub records: Vec<MetricsRecord>,
}

/// Loads, splits, trains, evaluates and writes `metrics.csv` and
/// `model.snapshot` under `<out_root>/<run_id>/`.
pub fn cmd_train(config: &RunConfig, out_root: &Path) -> Result<RunOutcome, RunError> {
    config.validate().map_err(RunError::Config)?;
    let mut corpus = load_corpus(&config.corpus, config.vocab.as_deref())?;
    if let Some(n) = config.subsample {
        corpus = corpus.subsample(n, config.seed.wrapping_add(17));
    }
    let (train, test) = split_train_test(&corpus, config.test_fraction, config.seed).map_err(RunError::Config)?;
    if train.is_empty() {
        return Err(RunError::Config(Error::arg("no training documents after the split")));
    }
    let heldout = split_heldout(&test, config.estimation_fraction, config.seed.wrapping_add(1))?;

    let run_id = config.run_id();
    let dir = out_root.join(&run_id);
    std::fs::create_dir_all(&dir)?;
    let metrics_path = dir.join("metrics.csv");
    let mut writer = MetricsWriter::new(BufWriter::new(File::create(&metrics_path)?))?;
    let (snapshot, records) = run_engine(config, &run_id, train, &heldout, |r| {
        log::info!("{} iteration {} K={} perplexity={:.3}", r.algorithm, r.iteration, r.k, r.heldout_perplexity);
        writer.write(r)
    })?;
    drop(writer);

    let snapshot_path = dir.join("model.snapshot");
    write_snapshot(&snapshot, BufWriter::new(File::create(&snapshot_path)?))?;
    Ok(RunOutcome {
        run_id,
        dir,
        metrics: metrics_path,
        snapshot: snapshot_path,
        records,
    })
}

/// Re-scores a saved model on a test corpus (every document is held out).
pub fn cmd_eval(
    snapshot: &Path,
    test_corpus: &Path,
    vocab: Option<&Path>,
    estimation_fraction: f64,
    seed: u64,
) -> Result<crate::eval::Perplexity, RunError> {
    let snap = read_snapshot(BufReader::new(File::open(snapshot)?))?;
    let test = load_corpus(test_corpus, vocab)?;
    let heldout = split_heldout(&test, estimation_fraction, seed).map_err(RunError::Config)?;
    let vocab_size = match &snap {
        Snapshot::Dpmm(m) => m.hyper.dcm.vocab_size,
        Snapshot::Hdp { state, .. } => state.vocab_size(),
    };
    if test.vocab_size != vocab_size {
        return Err(RunError::Config(Error::arg(format!(
            "test corpus vocabulary {} does not match model vocabulary {vocab_size}",
            test.vocab_size
        ))));
    }
    let p = match &snap {
        Snapshot::Dpmm(m) => heldout_single_membership(m, &heldout)?,
        Snapshot::Hdp { state, hyper } => heldout_mixed_membership(state, hyper, &heldout)?,
    };
    Ok(p)
}

/// Kind of synthetic corpus written by [`cmd_synth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Single-membership mixture; writes true labels alongside.
    Mixture,
    /// LDA mixed membership.
    Lda,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub components: usize,
    pub docs: usize,
    pub vocab_size: usize,
    pub doc_length: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

/// Writes `<prefix>.docword` and, for mixtures, `<prefix>.labels` (one
/// 0-based label per line). Returns the paths written.
pub fn cmd_synth(config: &SynthConfig, prefix: &Path) -> Result<Vec<PathBuf>, RunError> {
    let (corpus, labels) = match config.kind {
        SynthKind::Mixture => {
            let (c, l) = crate::dpmm::generate_synthetic(
                config.components,
                config.docs,
                config.vocab_size,
                config.doc_length,
                config.alpha,
                config.beta,
                config.seed,
            )
            .map_err(RunError::Config)?;
            (c, Some(l))
        }
        SynthKind::Lda => {
            let (c, _) = crate::hdplda::generate_lda(
                config.components,
                config.docs,
                config.vocab_size,
                config.doc_length,
                config.alpha,
                config.beta,
                config.seed,
            )
            .map_err(RunError::Config)?;
            (c, None)
        }
    };
    let with_ext = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let docword = with_ext(".docword");
    crate::corpus::write_uci(&corpus, BufWriter::new(File::create(&docword)?))?;
    let mut written = vec![docword];
    if let Some(labels) = labels {
        use std::io::Write;
        let path = with_ext(".labels");
        let mut out = BufWriter::new(File::create(&path)?);
        for l in labels {
            writeln!(out, "{l}")?;
        }
        written.push(path);
    }
    Ok(written)
}

/// Runs the Monte Carlo property suite; returns the results in order.
pub fn cmd_properties(seed: u64, vectors: Option<usize>, draws: usize) -> Vec<crate::properties::PropertyResult> {
    use crate::properties::{expectation_preservation, new_component_law};
    vec![
        expectation_preservation(vectors.unwrap_or(50), draws, seed),
        new_component_law(vectors.unwrap_or(20), draws, seed.wrapping_add(1)),
    ]
}
