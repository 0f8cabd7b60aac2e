//! Python bindings: corpus loading, rationale aggregation, masking,
//! training, evaluation and experiment runs.
//!
//! Structured results (reports, summaries) are returned as plain Python
//! dicts built from their JSON form.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use ratsup::corpus::{Corpus as CoreCorpus, Label, ResolvedPost, Split};
use ratsup::experiment::ExperimentConfig;
use ratsup::masking::{CommunityLexicon, MaskConfig};
use ratsup::metrics::{self, DiscreteRationale};
use ratsup::model::{ModelParams, Prediction};
use ratsup::rationale::{self as core_rationale, AttentionStrategy, AttentionTarget, NormalAttention};
use ratsup::synthetic::{generate_json, SyntheticConfig};
use ratsup::{Checkpoint, TrainConfig};
use serde::Serialize;

create_exception!(ratsup, RatsupError, PyException);
create_exception!(ratsup, ConfigError, RatsupError);
create_exception!(ratsup, DataError, RatsupError);

fn err(e: ratsup::Error) -> PyErr {
    if e.is_config() {
        ConfigError::new_err(e.to_string())
    } else {
        DataError::new_err(e.to_string())
    }
}

fn config_err(msg: impl Into<String>) -> PyErr {
    ConfigError::new_err(msg.into())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| DataError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| config_err(e.to_string()))
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(config_err)
}

/// A post after majority-vote resolution.
#[pyclass(name = "Post", frozen, skip_from_py_object, module = "ratsup")]
#[derive(Clone)]
struct PyPost {
    inner: ResolvedPost,
}

#[pymethods]
impl PyPost {
    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.inner.tokens().to_vec()
    }

    #[getter]
    fn split(&self) -> &'static str {
        self.inner.split().as_str()
    }

    #[getter]
    fn gold_label(&self) -> &'static str {
        self.inner.gold_label.as_str()
    }

    #[getter]
    fn gold_targets(&self) -> Vec<String> {
        self.inner.gold_targets.iter().cloned().collect()
    }

    #[getter]
    fn gold_rationale_union(&self) -> Vec<bool> {
        self.inner.gold_rationale_union.clone()
    }

    /// Rationales supplied by the annotators, in annotator order.
    #[getter]
    fn rationales(&self) -> Vec<Vec<bool>> {
        self.inner.post.rationales().into_iter().map(<[bool]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!("Post(id={:?}, label={}, tokens={})", self.inner.id(), self.inner.gold_label, self.inner.tokens().len())
    }
}

#[pyclass(name = "Corpus", frozen, module = "ratsup")]
struct PyCorpus {
    inner: CoreCorpus,
}

#[pymethods]
impl PyCorpus {
    /// Parses a corpus JSON array; returns the corpus and its load summary.
    #[staticmethod]
    fn from_json(py: Python<'_>, text: &str) -> PyResult<(Self, Py<PyAny>)> {
        let (inner, summary) = CoreCorpus::from_json_str(text).map_err(err)?;
        Ok((PyCorpus { inner }, to_py(py, &summary)?))
    }

    #[staticmethod]
    fn load(py: Python<'_>, path: PathBuf) -> PyResult<(Self, Py<PyAny>)> {
        let (inner, summary) = ratsup::load_corpus(path).map_err(err)?;
        Ok((PyCorpus { inner }, to_py(py, &summary)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn posts(&self) -> Vec<PyPost> {
        self.inner.posts().iter().map(|p| PyPost { inner: p.clone() }).collect()
    }

    fn split(&self, name: &str) -> PyResult<Vec<PyPost>> {
        let split: Split = parse(name)?;
        Ok(self.inner.split(split).map(|p| PyPost { inner: p.clone() }).collect())
    }

    /// Community → ids of posts whose gold targets contain it.
    fn community_index(&self) -> std::collections::BTreeMap<String, Vec<String>> {
        self.inner.community_index().clone()
    }

    /// Masks lexicon terms (train split only unless `apply_to="train_and_eval"`).
    /// `lexicon` maps community → terms; `None` uses the built-in lexicon
    /// plus the corpus community names. Returns the masked corpus and counts per split.
    #[pyo3(signature = (lexicon=None, mask_token="[UNK]", apply_to="train_only"))]
    fn mask(
        &self,
        py: Python<'_>,
        lexicon: Option<std::collections::BTreeMap<String, Vec<String>>>,
        mask_token: &str,
        apply_to: &str,
    ) -> PyResult<(PyCorpus, Py<PyAny>)> {
        let lexicon = match lexicon {
            Some(entries) => CommunityLexicon::new(entries).map_err(err)?,
            None => CommunityLexicon::default_for(&self.inner),
        };
        let config = MaskConfig {
            mask_token: mask_token.to_string(),
            apply_to: parse(apply_to)?,
        };
        config.validate().map_err(err)?;
        let (masked, counts) = ratsup::mask_corpus(self.inner.clone(), &lexicon, &config);
        Ok((PyCorpus { inner: masked }, to_py(py, &counts)?))
    }
}

/// Trained classifier parameters.
#[pyclass(name = "Model", frozen, module = "ratsup")]
struct PyModel {
    params: ModelParams,
    config: TrainConfig,
}

fn prediction_dict<'py>(py: Python<'py>, p: &Prediction) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let probs = PyDict::new(py);
    for label in Label::ALL {
        probs.set_item(label.as_str(), p.prob(label))?;
    }
    d.set_item("label", p.label().as_str())?;
    d.set_item("probs", probs)?;
    d.set_item("attention", p.attention.clone())?;
    d.set_item("toxicity", p.toxicity())?;
    Ok(d)
}

fn posts_of(posts: Vec<PyRef<'_, PyPost>>) -> PyResult<Vec<ResolvedPost>> {
    if posts.is_empty() {
        return Err(DataError::new_err("no posts given"));
    }
    Ok(posts.iter().map(|p| p.inner.clone()).collect())
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let checkpoint = Checkpoint::load(path).map_err(err)?;
        let config = checkpoint.config.clone();
        Ok(PyModel {
            params: checkpoint.into_params().map_err(err)?,
            config,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        Checkpoint::new(&self.params, &self.config).save(path).map_err(err)
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        self.params.vocab.tokens().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.params.dim
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.config)
    }

    fn predict<'py>(&self, py: Python<'py>, tokens: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
        if tokens.is_empty() {
            return Err(DataError::new_err("empty token list"));
        }
        prediction_dict(py, &self.params.forward(&tokens))
    }

    /// Prediction over the tokens whose `keep` entry is true.
    fn predict_with_erasure<'py>(
        &self,
        py: Python<'py>,
        tokens: Vec<String>,
        keep: Vec<bool>,
    ) -> PyResult<Bound<'py, PyDict>> {
        if tokens.len() != keep.len() {
            return Err(DataError::new_err("keep mask length differs from token count"));
        }
        prediction_dict(py, &self.params.predict_with_erasure(&tokens, &keep))
    }

    /// Performance, bias and explainability report over `posts`.
    #[pyo3(signature = (posts, k=metrics::DEFAULT_TOP_K))]
    fn evaluate(&self, py: Python<'_>, posts: Vec<PyRef<'_, PyPost>>, k: usize) -> PyResult<Py<PyAny>> {
        if k == 0 {
            return Err(config_err("k must be positive"));
        }
        let posts = posts_of(posts)?;
        to_py(py, &metrics::evaluate(&self.params, &posts, k).map_err(err)?)
    }

    fn error_analysis(&self, py: Python<'_>, posts: Vec<PyRef<'_, PyPost>>) -> PyResult<Py<PyAny>> {
        let posts = posts_of(posts)?;
        to_py(py, &ratsup::error_analysis(&self.params, &posts).map_err(err)?)
    }
}

/// Trains on the corpus train split. Returns the model and the loss
/// history (initial loss, then one entry per epoch).
#[pyfunction]
#[pyo3(signature = (
    corpus, lambda_=1.0, strategy="normal", normal_attention="uniform",
    learning_rate=None, epochs=None, batch_size=None, seed=None, dim=None, mask_token="[UNK]"
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    corpus: &PyCorpus,
    lambda_: f64,
    strategy: &str,
    normal_attention: &str,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    dim: Option<usize>,
    mask_token: &str,
) -> PyResult<(PyModel, Py<PyAny>)> {
    let d = TrainConfig::default();
    let config = TrainConfig {
        lambda: lambda_,
        strategy: parse(strategy)?,
        normal_attention: parse::<NormalAttention>(normal_attention)?,
        learning_rate: learning_rate.unwrap_or(d.learning_rate),
        epochs: epochs.unwrap_or(d.epochs),
        batch_size: batch_size.unwrap_or(d.batch_size),
        seed: seed.unwrap_or(d.seed),
        dim: dim.unwrap_or(d.dim),
        mask_token: mask_token.to_string(),
    };
    let inner = &corpus.inner;
    let outcome = py.detach(|| ratsup::train_with_history(inner, &config)).map_err(err)?;
    let history = to_py(py, &outcome.history)?;
    Ok((PyModel { params: outcome.params, config }, history))
}

/// Combines binary rationales (one list per annotator) into raw importances.
#[pyfunction]
#[pyo3(signature = (rationales, strategy="normal"))]
fn combine_rationales(rationales: Vec<Vec<bool>>, strategy: &str) -> PyResult<Vec<f64>> {
    core_rationale::combine_rationales(&rationales, parse(strategy)?).map_err(err)
}

#[pyfunction]
fn softmax_normalize(raw: Vec<f64>) -> PyResult<Vec<f64>> {
    if raw.is_empty() {
        return Err(DataError::new_err("empty vector"));
    }
    Ok(core_rationale::softmax_normalize(&raw).into_weights())
}

/// Ground-truth attention of a post and whether it fell back to uniform.
#[pyfunction]
#[pyo3(signature = (post, strategy="normal"))]
fn ground_truth_attention(post: &PyPost, strategy: &str) -> PyResult<(Vec<f64>, bool)> {
    let g = core_rationale::ground_truth_attention(&post.inner, parse::<AttentionStrategy>(strategy)?);
    Ok((g.target.into_weights(), g.degenerate))
}

/// `(l_pred, l_att, l_total)` for one prediction.
#[pyfunction]
fn loss(probs: [f64; 3], attention: Vec<f64>, gold: &str, target: Vec<f64>, lambda_: f64) -> PyResult<(f64, f64, f64)> {
    if attention.len() != target.len() {
        return Err(DataError::new_err("attention and target lengths differ"));
    }
    let target = AttentionTarget::from_weights(target).map_err(err)?;
    let pred = Prediction { probs, attention };
    let l = ratsup::loss(&pred, parse(gold)?, &target, lambda_);
    Ok((l.l_pred, l.l_att, l.l_total))
}

#[pyfunction]
fn auroc(scores: Vec<f64>, positives: Vec<bool>) -> PyResult<Option<f64>> {
    if scores.len() != positives.len() {
        return Err(DataError::new_err("scores and labels differ in length"));
    }
    Ok(metrics::auroc_binary(&scores, &positives))
}

#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(DataError::new_err("scores and labels differ in length"));
    }
    Ok(metrics::average_precision(&scores, &labels))
}

fn rationale_sets(preds: Vec<Vec<usize>>, golds: Vec<Vec<usize>>) -> PyResult<(Vec<DiscreteRationale>, Vec<DiscreteRationale>)> {
    if preds.len() != golds.len() {
        return Err(DataError::new_err("prediction and gold lists differ in length"));
    }
    Ok((
        preds.into_iter().map(DiscreteRationale::new).collect(),
        golds.into_iter().map(DiscreteRationale::new).collect(),
    ))
}

/// IOU F1 over posts; rationales are lists of token indices.
#[pyfunction]
fn iou_f1(preds: Vec<Vec<usize>>, golds: Vec<Vec<usize>>) -> PyResult<f64> {
    let (p, g) = rationale_sets(preds, golds)?;
    Ok(metrics::iou_f1(&p, &g))
}

#[pyfunction]
fn token_f1(preds: Vec<Vec<usize>>, golds: Vec<Vec<usize>>) -> PyResult<f64> {
    let (p, g) = rationale_sets(preds, golds)?;
    Ok(metrics::token_f1(&p, &g))
}

/// Indices of the `k` highest attention weights (ties to the lower index).
#[pyfunction]
#[pyo3(signature = (attention, k=metrics::DEFAULT_TOP_K))]
fn extract_rationale(attention: Vec<f64>, k: usize) -> Vec<usize> {
    metrics::extract_rationale(&attention, k).indices().iter().copied().collect()
}

fn experiment_config(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<ExperimentConfig> {
    let config: ExperimentConfig = from_py(py, config)?;
    config.validate().map_err(err)?;
    Ok(config)
}

/// One run with the first strategy and λ of `config` (a dict with the
/// config-file keys). Writes artifacts to `config["out"]` and returns the report.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let config = experiment_config(py, config)?;
    let run = py.detach(|| ratsup::run_experiment(&config)).map_err(err)?;
    to_py(py, &run.row())
}

/// Every strategy × λ run; returns the report rows in table order.
#[pyfunction]
fn sweep(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let config = experiment_config(py, config)?;
    let output = py.detach(|| ratsup::sweep(&config)).map_err(err)?;
    to_py(py, &output.rows())
}

/// Seeded synthetic corpus as JSON text.
#[pyfunction]
#[pyo3(signature = (posts=500, seed=7))]
fn synthetic_corpus(posts: usize, seed: u64) -> String {
    generate_json(&SyntheticConfig { posts, seed, ..SyntheticConfig::default() })
}

#[pymodule]
#[pyo3(name = "ratsup")]
fn ratsup_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("RatsupError", py.get_type::<RatsupError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add_class::<PyPost>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(combine_rationales, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth_attention, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(iou_f1, m)?)?;
    m.add_function(wrap_pyfunction!(token_f1, m)?)?;
    m.add_function(wrap_pyfunction!(extract_rationale, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    Ok(())
}
