use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hybrid_dp::cli::{
    cmd_eval, cmd_properties, cmd_synth, cmd_train, out_root_from_env, parse_config_file, RunConfig, RunError,
    SynthConfig, SynthKind, EXIT_CONFIG,
};

#[derive(Parser)]
#[command(name = "hybrid-dp", version, about = "Truncation-free DPMM and HDP-LDA inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write metrics.csv and model.snapshot under $HYBRID_DP_OUT/<run_id>/ (default runs/).
    Train(Box<TrainArgs>),
    /// Score a saved model on a test corpus.
    Eval(EvalArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
    /// Run the Monte Carlo checks of the hybrid update.
    Properties(PropertiesArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// hcvb0 | cgs | tcvb0 | hcsvb0 | scvb0 | pcsvb0.
    #[arg(long)]
    algo: Option<String>,
    /// UCI bag-of-words docword file.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Vocabulary file, one word per line.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Train on a seeded subset of this many documents.
    #[arg(long)]
    subsample: Option<usize>,
    /// Fraction of documents held out [default: 0.2].
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Fraction of each held-out document used for estimation [default: 0.7].
    #[arg(long)]
    estimation_fraction: Option<f64>,
    /// DP concentration for the mixture [default: 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Topic-word smoothing [default: 0.1 for mixtures, 0.01 for topic models].
    #[arg(long)]
    beta: Option<f64>,
    /// Document-level concentration [default: 1].
    #[arg(long)]
    a: Option<f64>,
    /// Corpus-level stick concentration [default: 1].
    #[arg(long)]
    alpha0: Option<f64>,
    /// Step-size delay [default: 64].
    #[arg(long)]
    tau0: Option<f64>,
    /// Step-size decay, in (0.5, 1] [default: 0.6].
    #[arg(long)]
    kappa: Option<f64>,
    /// Minibatch size [default: 60].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Local passes per document [default: 5].
    #[arg(long)]
    local_passes: Option<usize>,
    /// Prune components below this mass [default: 1e-3 for mixtures, 1e-2 for topic models].
    #[arg(long)]
    prune_threshold: Option<f64>,
    /// RNG seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Batch sweeps [default: 100].
    #[arg(long)]
    sweeps: Option<u64>,
    /// Minibatch steps [default: 1000].
    #[arg(long)]
    steps: Option<u64>,
    /// Truncation level for tcvb0, scvb0 and pcsvb0 [default: 40].
    #[arg(short = 'T', long = "truncation", visible_alias = "T")]
    truncation: Option<usize>,
    /// Evaluate every this many iterations [default: 1 for sweeps, 25 for steps].
    #[arg(long)]
    eval_every: Option<u64>,
    /// Record wall-clock time; false makes metrics.csv byte-reproducible [default: true].
    #[arg(long)]
    timing: Option<bool>,
}

impl TrainArgs {
    fn flags(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let s = |v: Option<&dyn ToString>| v.map(|v| v.to_string());
        put("algo", self.algo.clone());
        put("corpus", self.corpus.as_ref().map(|p| p.display().to_string()));
        put("vocab", self.vocab.as_ref().map(|p| p.display().to_string()));
        put("subsample", s(self.subsample.as_ref().map(|v| v as _)));
        put("test-fraction", s(self.test_fraction.as_ref().map(|v| v as _)));
        put("estimation-fraction", s(self.estimation_fraction.as_ref().map(|v| v as _)));
        put("alpha", s(self.alpha.as_ref().map(|v| v as _)));
        put("beta", s(self.beta.as_ref().map(|v| v as _)));
        put("a", s(self.a.as_ref().map(|v| v as _)));
        put("alpha0", s(self.alpha0.as_ref().map(|v| v as _)));
        put("tau0", s(self.tau0.as_ref().map(|v| v as _)));
        put("kappa", s(self.kappa.as_ref().map(|v| v as _)));
        put("batch-size", s(self.batch_size.as_ref().map(|v| v as _)));
        put("local-passes", s(self.local_passes.as_ref().map(|v| v as _)));
        put("prune-threshold", s(self.prune_threshold.as_ref().map(|v| v as _)));
        put("seed", s(self.seed.as_ref().map(|v| v as _)));
        put("sweeps", s(self.sweeps.as_ref().map(|v| v as _)));
        put("steps", s(self.steps.as_ref().map(|v| v as _)));
        put("T", s(self.truncation.as_ref().map(|v| v as _)));
        put("eval-every", s(self.eval_every.as_ref().map(|v| v as _)));
        put("timing", s(self.timing.as_ref().map(|v| v as _)));
        m
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Snapshot written by `train`.
    #[arg(long)]
    snapshot: PathBuf,
    /// UCI docword file; every document is split and scored.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    estimation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthModel {
    Dpmm,
    Lda,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "dpmm")]
    model: SynthModel,
    /// Output prefix; writes <prefix>.docword (and <prefix>.labels for dpmm).
    #[arg(long)]
    out: PathBuf,
    /// Number of true clusters or topics.
    #[arg(long, default_value_t = 5)]
    components: usize,
    #[arg(long, default_value_t = 500)]
    docs: usize,
    #[arg(long, default_value_t = 50)]
    vocab_size: usize,
    #[arg(long, default_value_t = 50)]
    doc_length: usize,
    /// Symmetric Dirichlet over mixture weights (dpmm) or per-document topic proportions (lda).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Symmetric Dirichlet over each component's word distribution.
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PropertiesArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    /// Vectors per check [default: 50 and 20].
    #[arg(long)]
    vectors: Option<usize>,
}

fn train(args: &TrainArgs) -> Result<(), RunError> {
    let file = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| RunError::Config(e.into()))?;
            parse_config_file(&text).map_err(RunError::Config)?
        }
        None => BTreeMap::new(),
    };
    let config = RunConfig::resolve(&args.flags(), &file).map_err(RunError::Config)?;
    let outcome = cmd_train(&config, &out_root_from_env())?;
    if let Some(last) = outcome.records.last() {
        println!(
            "run {} K={} perplexity={:.4} -> {}",
            outcome.run_id,
            last.k,
            last.heldout_perplexity,
            outcome.dir.display()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, RunError> {
    match cli.command {
        Command::Train(args) => train(&args)?,
        Command::Eval(args) => {
            let p = cmd_eval(
                &args.snapshot,
                &args.corpus,
                args.vocab.as_deref(),
                args.estimation_fraction,
                args.seed,
            )?;
            println!(
                "perplexity={:.6} tokens={} docs={} skipped={}",
                p.perplexity, p.tokens, p.docs, p.skipped
            );
        }
        Command::Synth(args) => {
            let config = SynthConfig {
                kind: match args.model {
                    SynthModel::Dpmm => SynthKind::Mixture,
                    SynthModel::Lda => SynthKind::Lda,
                },
                components: args.components,
                docs: args.docs,
                vocab_size: args.vocab_size,
                doc_length: args.doc_length,
                alpha: args.alpha,
                beta: args.beta,
                seed: args.seed,
            };
            for p in cmd_synth(&config, &args.out)? {
                println!("{}", p.display());
            }
        }
        Command::Properties(args) => {
            let results = cmd_properties(args.seed, args.vectors, args.draws);
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
