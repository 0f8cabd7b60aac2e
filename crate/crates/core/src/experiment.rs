//! Experiment pipeline: load → (mask) → train → evaluate → report.
//!
//! `run_experiment` performs one run; `sweep` runs every (attention
//! strategy, λ) combination and merges the tables. Runs are independent:
//! the run for the i-th smallest λ is seeded with `seed + i`, whatever the
//! grid order, so rows do not depend on one another.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analysis_from_predictions, ErrorAnalysis};
use crate::corpus::{load_corpus, Corpus, LoadSummary, ResolvedPost, Split};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::masking::{mask_corpus, ApplyTo, CommunityLexicon, MaskConfig, MaskCounts, DEFAULT_MASK_TOKEN};
use crate::metrics::{predict_all, report_from_predictions, EvalReport, DEFAULT_TOP_K};
use crate::model::{train_with_history, Checkpoint, LossBreakdown, ModelParams, TrainConfig};
use crate::rationale::{AttentionStrategy, NormalAttention};
use crate::report::{fmt_f64, table_from_rows, to_tables, ReportRow};

/// λ values of the default sweep grid.
pub const DEFAULT_LAMBDA_GRID: [f64; 4] = [0.001, 1.0, 10.0, 100.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    /// Strategies to run; single runs use the first.
    pub attention: Vec<AttentionStrategy>,
    /// λ grid; single runs use the first value.
    pub lambdas: Vec<f64>,
    pub mask: bool,
    /// Lexicon file; the built-in lexicon plus corpus community names when absent.
    pub lexicon: Option<PathBuf>,
    pub mask_token: String,
    pub mask_apply_to: ApplyTo,
    pub normal_attention: NormalAttention,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dim: usize,
    /// Tokens per extracted rationale.
    pub k: usize,
    pub eval_split: Split,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        ExperimentConfig {
            corpus: PathBuf::new(),
            attention: vec![AttentionStrategy::Normal],
            lambdas: DEFAULT_LAMBDA_GRID.to_vec(),
            mask: false,
            lexicon: None,
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            mask_apply_to: ApplyTo::TrainOnly,
            normal_attention: train.normal_attention,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            batch_size: train.batch_size,
            seed: train.seed,
            dim: train.dim,
            k: DEFAULT_TOP_K,
            eval_split: Split::Test,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML or JSON config file (chosen by extension, TOML otherwise).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))
        }
    }

    pub fn train_config(&self, strategy: AttentionStrategy, lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda,
            strategy,
            normal_attention: self.normal_attention,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            dim: self.dim,
            mask_token: self.mask_token.clone(),
        }
    }

    pub fn mask_config(&self) -> MaskConfig {
        MaskConfig {
            mask_token: self.mask_token.clone(),
            apply_to: self.mask_apply_to,
        }
    }

    /// Reports every invalid field at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.corpus.as_os_str().is_empty() {
            problems.push("corpus: path is required".to_string());
        }
        if self.attention.is_empty() {
            problems.push("attention: at least one strategy is required".into());
        }
        if self.lambdas.is_empty() {
            problems.push("lambdas: grid must be non-empty".into());
        }
        for &l in &self.lambdas {
            if !(l >= 0.0 && l.is_finite()) {
                problems.push(format!("lambdas: {l} is not a finite value >= 0"));
            }
        }
        if self.k == 0 {
            problems.push("k: must be positive".into());
        }
        if let Err(Error::Config(train)) = self.train_config(AttentionStrategy::Normal, 0.0, 0).validate() {
            problems.extend(train);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Distinct λ values in ascending order.
    pub fn lambda_grid(&self) -> Vec<f64> {
        let mut grid = self.lambdas.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    /// Distinct strategies in declaration order of [`AttentionStrategy`].
    pub fn strategies(&self) -> Vec<AttentionStrategy> {
        self.attention.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskingSummary {
    pub enabled: bool,
    pub mask_token: String,
    pub apply_to: ApplyTo,
    pub lexicon: Option<PathBuf>,
    pub counts: MaskCounts,
}

/// Corpus after loading and optional masking, shared by all runs of a sweep.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub corpus: Corpus,
    pub load_summary: LoadSummary,
    pub masking: MaskingSummary,
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedData> {
    let (corpus, load_summary) = load_corpus(&config.corpus)?;
    prepare_loaded(config, corpus, load_summary)
}

pub fn prepare_loaded(config: &ExperimentConfig, corpus: Corpus, load_summary: LoadSummary) -> Result<PreparedData> {
    let mask_config = config.mask_config();
    let (corpus, counts) = if config.mask {
        mask_config.validate()?;
        let lexicon = match &config.lexicon {
            Some(path) => CommunityLexicon::load(path).map_err(|e| match e {
                Error::Io { .. } | Error::Json { .. } => Error::Config(vec![format!("lexicon: {e}")]),
                other => other,
            })?,
            None => CommunityLexicon::default_for(&corpus),
        };
        mask_corpus(corpus, &lexicon, &mask_config)
    } else {
        (corpus, MaskCounts::default())
    };
    Ok(PreparedData {
        corpus,
        load_summary,
        masking: MaskingSummary {
            enabled: config.mask,
            mask_token: mask_config.mask_token,
            apply_to: mask_config.apply_to,
            lexicon: config.lexicon.clone(),
            counts,
        },
    })
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub attention: AttentionStrategy,
    pub lambda: f64,
    pub train_config: TrainConfig,
    pub params: ModelParams,
    pub history: Vec<LossBreakdown>,
    pub report: EvalReport,
    pub analysis: ErrorAnalysis,
}

impl RunOutput {
    pub fn row(&self) -> ReportRow {
        ReportRow {
            attention: self.attention,
            lambda: self.lambda,
            report: self.report.clone(),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.params, &self.train_config)
    }
}

fn eval_posts(data: &PreparedData, split: Split) -> Result<Vec<ResolvedPost>> {
    let posts = data.corpus.split_vec(split);
    if posts.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    Ok(posts)
}

/// Trains and evaluates one configuration in memory.
pub fn execute(
    data: &PreparedData,
    config: &ExperimentConfig,
    attention: AttentionStrategy,
    lambda: f64,
    seed: u64,
) -> Result<RunOutput> {
    let train_config = config.train_config(attention, lambda, seed);
    let posts = eval_posts(data, config.eval_split)?;
    let outcome = train_with_history(&data.corpus, &train_config)?;
    let preds = predict_all(&outcome.params, &posts);
    let report = report_from_predictions(&outcome.params, &posts, &preds, config.k);
    let analysis = analysis_from_predictions(&posts, &preds);
    Ok(RunOutput {
        attention,
        lambda,
        train_config,
        params: outcome.params,
        history: outcome.history,
        report,
        analysis,
    })
}

#[derive(Serialize)]
struct RunManifest<'a> {
    attention: AttentionStrategy,
    lambda: f64,
    eval_split: Split,
    k: usize,
    train_config: &'a TrainConfig,
    masking: &'a MaskingSummary,
    load_summary: &'a LoadSummary,
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    write_atomic(&dir.join(name), text.as_bytes())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn history_csv(history: &[LossBreakdown]) -> Result<String> {
    let rows = history
        .iter()
        .enumerate()
        .map(|(epoch, l)| vec![epoch.to_string(), fmt_f64(l.l_pred), fmt_f64(l.l_att), fmt_f64(l.l_total)])
        .collect();
    table_from_rows(&["epoch", "l_pred", "l_att", "l_total"], rows)
}

/// Writes checkpoint, report, tables, error analysis and plot data for one run.
pub fn write_run(dir: &Path, run: &RunOutput, data: &PreparedData, config: &ExperimentConfig) -> Result<()> {
    run.checkpoint().save(dir.join("checkpoint.json"))?;
    write_text(dir, "report.json", &to_json(&run.row()))?;
    for (name, text) in to_tables(std::slice::from_ref(&run.row()))?.files() {
        write_text(dir, name, text)?;
    }
    write_text(dir, "error_analysis.json", &to_json(&run.analysis))?;
    write_text(dir, "confusion_matrix.csv", &run.analysis.confusion_csv()?)?;
    write_text(dir, "community_misclassifications.csv", &run.analysis.community_csv()?)?;
    write_text(dir, "class_misclassifications.csv", &run.analysis.class_csv()?)?;
    write_text(dir, "training_history.csv", &history_csv(&run.history)?)?;
    let manifest = RunManifest {
        attention: run.attention,
        lambda: run.lambda,
        eval_split: config.eval_split,
        k: config.k,
        train_config: &run.train_config,
        masking: &data.masking,
        load_summary: &data.load_summary,
    };
    write_text(dir, "run.json", &to_json(&manifest))
}

/// One run with the first configured strategy and λ, seeded with `seed`;
/// artifacts go to `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let data = prepare(config)?;
    let run = execute(&data, config, config.attention[0], config.lambdas[0], config.seed)?;
    write_run(&config.out, &run, &data, config)?;
    Ok(run)
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    /// Ordered by strategy, then λ ascending.
    pub runs: Vec<RunOutput>,
}

impl SweepOutput {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.runs.iter().map(RunOutput::row).collect()
    }
}

pub fn run_dir_name(attention: AttentionStrategy, lambda: f64) -> String {
    format!("{attention}_lambda_{}", fmt_f64(lambda))
}

/// Runs every strategy × λ combination in memory.
pub fn sweep_runs(data: &PreparedData, config: &ExperimentConfig) -> Result<SweepOutput> {
    let grid = config.lambda_grid();
    let jobs: Vec<(AttentionStrategy, usize, f64)> = config
        .strategies()
        .into_iter()
        .flat_map(|s| grid.iter().enumerate().map(move |(i, &l)| (s, i, l)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(s, i, l)| execute(data, config, s, l, config.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput { runs })
}

/// Sweep with artifacts: one directory per run under `out/runs/`, merged
/// tables and `sweep.json` in `out/`.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let data = prepare(config)?;
    let output = sweep_runs(&data, config)?;
    for run in &output.runs {
        let dir = config.out.join("runs").join(run_dir_name(run.attention, run.lambda));
        write_run(&dir, run, &data, config)?;
    }
    let rows = output.rows();
    for (name, text) in to_tables(&rows)?.files() {
        write_text(&config.out, name, text)?;
    }
    write_text(&config.out, "sweep.json", &to_json(&rows))?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_reports_each_field() {
        let config = ExperimentConfig {
            lambdas: vec![],
            k: 0,
            batch_size: 0,
            ..ExperimentConfig::default()
        };
        match config.validate() {
            Err(Error::Config(problems)) => {
                assert_eq!(problems.len(), 4, "{problems:?}");
                assert!(problems[0].starts_with("corpus"));
            }
            other => panic!("expected config error, got {other:?}"),
        }
        let config = ExperimentConfig {
            corpus: "x.json".into(),
            lambdas: vec![-1.0],
            ..ExperimentConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn grid_is_sorted_and_deduplicated() {
        let config = ExperimentConfig {
            lambdas: vec![100.0, 0.001, 10.0, 1.0, 10.0],
            attention: vec![AttentionStrategy::Lenient, AttentionStrategy::Normal, AttentionStrategy::Lenient],
            ..ExperimentConfig::default()
        };
        assert_eq!(config.lambda_grid(), DEFAULT_LAMBDA_GRID.to_vec());
        assert_eq!(config.strategies(), [AttentionStrategy::Normal, AttentionStrategy::Lenient]);
        assert_eq!(run_dir_name(AttentionStrategy::Conservative, 0.001), "conservative_lambda_0.001");
    }

    #[test]
    fn config_files_parse() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        std::fs::write(&toml_path, "corpus = \"a.json\"\nlambdas = [1.0, 10.0]\nattention = [\"conservative\"]\nmask = true\n").unwrap();
        let c = ExperimentConfig::from_file(&toml_path).unwrap();
        assert_eq!(c.lambdas, vec![1.0, 10.0]);
        assert_eq!(c.attention, vec![AttentionStrategy::Conservative]);
        assert!(c.mask);
        assert_eq!(c.k, DEFAULT_TOP_K);

        let json_path = dir.path().join("c.json");
        std::fs::write(&json_path, r#"{"corpus": "a.json", "seed": 3}"#).unwrap();
        assert_eq!(ExperimentConfig::from_file(&json_path).unwrap().seed, 3);

        std::fs::write(&json_path, r#"{"corpus": "a.json", "sede": 3}"#).unwrap();
        assert!(matches!(ExperimentConfig::from_file(&json_path), Err(Error::Config(_))));
    }
}
