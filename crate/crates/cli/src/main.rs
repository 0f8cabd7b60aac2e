//! `ratsup` command-line runner.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ratsup::experiment::{self, history_csv, ExperimentConfig};
use ratsup::io::write_atomic;
use ratsup::masking::{mask_post, ApplyTo, CommunityLexicon, MaskConfig};
use ratsup::metrics::evaluate;
use ratsup::report::{to_tables, ReportRow};
use ratsup::synthetic::{generate_json, SyntheticConfig};
use ratsup::{
    error_analysis, load_corpus, train_with_history, AttentionStrategy, Checkpoint, Error, NormalAttention,
    Split,
};

#[derive(Parser)]
#[command(name = "ratsup", version, about = "Rationale-supervised toxic speech classification experiments")]
struct Cli {
    /// TOML or JSON experiment config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a corpus and print the load summary.
    Ingest(IngestArgs),
    /// Train one model (first strategy and λ) and write its checkpoint.
    Train(ExperimentArgs),
    /// Score a checkpoint on a corpus split.
    Evaluate(CheckpointArgs),
    /// Train and evaluate every strategy × λ combination.
    Sweep(ExperimentArgs),
    /// Confusion matrix and per-community misclassifications for a checkpoint.
    Analyze(CheckpointArgs),
    /// Train, evaluate and analyse one configuration.
    Run(ExperimentArgs),
    /// Write a seeded synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Directory for load_summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Comma-separated: normal, conservative, lenient.
    #[arg(long, value_delimiter = ',')]
    attention: Vec<AttentionStrategy>,
    /// Comma-separated λ grid.
    #[arg(long = "lambda", value_delimiter = ',', allow_hyphen_values = true)]
    lambdas: Vec<f64>,
    /// Mask target-community terms before training.
    #[arg(long)]
    mask: bool,
    /// JSON lexicon {"community": ["term", ...]}; implies --mask.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    mask_token: Option<String>,
    /// train_only or train_and_eval.
    #[arg(long)]
    mask_apply_to: Option<ApplyTo>,
    /// uniform or skip.
    #[arg(long)]
    normal_attention: Option<NormalAttention>,
    /// Tokens per extracted rationale.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluation split: train, val or test.
    #[arg(long)]
    split: Option<Split>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct CheckpointArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Output corpus file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SyntheticConfig::default().posts)]
    posts: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().seed)]
    seed: u64,
}

enum Failure {
    Config(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn base_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    match path {
        // an unreadable config file is a configuration problem, not a data one
        Some(p) => ExperimentConfig::from_file(p).map_err(|e| Failure::Config(e.to_string())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply(mut config: ExperimentConfig, args: ExperimentArgs) -> ExperimentConfig {
    if let Some(v) = args.corpus {
        config.corpus = v;
    }
    if !args.attention.is_empty() {
        config.attention = args.attention;
    }
    if !args.lambdas.is_empty() {
        config.lambdas = args.lambdas;
    }
    if args.mask || args.lexicon.is_some() {
        config.mask = true;
    }
    if let Some(v) = args.lexicon {
        config.lexicon = Some(v);
    }
    if let Some(v) = args.mask_token {
        config.mask_token = v;
    }
    if let Some(v) = args.mask_apply_to {
        config.mask_apply_to = v;
    }
    if let Some(v) = args.normal_attention {
        config.normal_attention = v;
    }
    if let Some(v) = args.k {
        config.k = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.out {
        config.out = v;
    }
    if let Some(v) = args.split {
        config.eval_split = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.dim {
        config.dim = v;
    }
    config
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Prints to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    write_atomic(&dir.join(name), text.as_bytes()).map_err(Failure::from)
}

fn ingest(config: Option<&Path>, args: IngestArgs) -> Outcome {
    let mut config = base_config(config)?;
    if let Some(c) = args.corpus {
        config.corpus = c;
    }
    if config.corpus.as_os_str().is_empty() {
        return Err(Failure::Config("corpus: path is required".into()));
    }
    let (corpus, summary) = load_corpus(&config.corpus)?;
    let text = json(&summary);
    if let Some(out) = args.out {
        write(&out, "load_summary.json", &text)?;
    }
    emit(&text);
    eprintln!(
        "loaded {} of {} posts ({} communities)",
        summary.loaded,
        summary.total,
        corpus.community_index().len()
    );
    Ok(())
}

fn train(config: ExperimentConfig) -> Outcome {
    config.validate()?;
    let data = experiment::prepare(&config)?;
    let train_config = config.train_config(config.attention[0], config.lambdas[0], config.seed);
    let outcome = train_with_history(&data.corpus, &train_config)?;
    Checkpoint::new(&outcome.params, &train_config).save(config.out.join("checkpoint.json"))?;
    write(&config.out, "training_history.csv", &history_csv(&outcome.history)?)?;
    let last = outcome.history.last().expect("initial loss recorded");
    emit(&format!(
        "trained {} λ={} for {} epochs: loss {} -> {}; checkpoint in {}\n",
        train_config.strategy,
        train_config.lambda,
        train_config.epochs,
        outcome.history[0].l_total,
        last.l_total,
        config.out.display()
    ));
    Ok(())
}

/// Loads the checkpoint and the evaluation split, masking it when asked to.
fn checkpoint_inputs(
    config: &ExperimentConfig,
    path: &Path,
) -> Result<(ratsup::ModelParams, Checkpoint, Vec<ratsup::ResolvedPost>), Failure> {
    if config.corpus.as_os_str().is_empty() {
        return Err(Failure::Config("corpus: path is required".into()));
    }
    if config.k == 0 {
        return Err(Failure::Config("k: must be positive".into()));
    }
    let checkpoint = Checkpoint::load(path)?;
    let params = checkpoint.clone().into_params()?;
    let (corpus, _) = load_corpus(&config.corpus)?;
    let mut posts = corpus.split_vec(config.eval_split);
    if posts.is_empty() {
        return Err(Failure::Data(format!("split {} is empty", config.eval_split.as_str())));
    }
    if config.mask {
        let lexicon = match &config.lexicon {
            Some(p) => CommunityLexicon::load(p).map_err(|e| Failure::Config(e.to_string()))?,
            None => CommunityLexicon::default_for(&corpus),
        };
        let mask = MaskConfig {
            mask_token: params.vocab.mask_token().to_string(),
            apply_to: ApplyTo::TrainAndEval,
        };
        posts = posts.iter().map(|p| mask_post(p, &lexicon, &mask)).collect();
    }
    Ok((params, checkpoint, posts))
}

fn evaluate_cmd(config: ExperimentConfig, path: &Path) -> Outcome {
    let (params, checkpoint, posts) = checkpoint_inputs(&config, path)?;
    let report = evaluate(&params, &posts, config.k)?;
    let row = ReportRow {
        attention: checkpoint.config.strategy,
        lambda: checkpoint.config.lambda,
        report,
    };
    write(&config.out, "report.json", &json(&row))?;
    let tables = to_tables(std::slice::from_ref(&row))?;
    for (name, text) in tables.files() {
        write(&config.out, name, text)?;
    }
    emit(&tables.performance);
    emit(&tables.bias);
    emit(&tables.explainability);
    Ok(())
}

fn analyze(config: ExperimentConfig, path: &Path) -> Outcome {
    let (params, _, posts) = checkpoint_inputs(&config, path)?;
    let analysis = error_analysis(&params, &posts)?;
    write(&config.out, "error_analysis.json", &json(&analysis))?;
    let confusion = analysis.confusion_csv()?;
    write(&config.out, "confusion_matrix.csv", &confusion)?;
    write(&config.out, "community_misclassifications.csv", &analysis.community_csv()?)?;
    write(&config.out, "class_misclassifications.csv", &analysis.class_csv()?)?;
    emit(&confusion);
    for (community, count) in &analysis.top_communities {
        emit(&format!("{community}: {count}\n"));
    }
    Ok(())
}

fn run(config: ExperimentConfig) -> Outcome {
    let output = experiment::run_experiment(&config)?;
    let tables = to_tables(&[output.row()])?;
    emit(&tables.performance);
    emit(&tables.explainability);
    Ok(())
}

fn sweep(config: ExperimentConfig) -> Outcome {
    let output = experiment::sweep(&config)?;
    let tables = to_tables(&output.rows())?;
    emit(&tables.performance);
    emit(&tables.bias);
    emit(&tables.explainability);
    Ok(())
}

fn synth(args: SynthArgs) -> Outcome {
    let config = SyntheticConfig {
        posts: args.posts,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    write_atomic(&args.out, generate_json(&config).as_bytes())?;
    emit(&format!("wrote {} posts to {}\n", config.posts, args.out.display()));
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Ingest(args) => ingest(config_path, args),
        Command::Train(args) => train(apply(base_config(config_path)?, args)),
        Command::Sweep(args) => sweep(apply(base_config(config_path)?, args)),
        Command::Run(args) => run(apply(base_config(config_path)?, args)),
        Command::Evaluate(args) => evaluate_cmd(apply(base_config(config_path)?, args.experiment), &args.checkpoint),
        Command::Analyze(args) => analyze(apply(base_config(config_path)?, args.experiment), &args.checkpoint),
        Command::Synth(args) => synth(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("data error: {msg}");
            ExitCode::from(2)
        }
    }
}
