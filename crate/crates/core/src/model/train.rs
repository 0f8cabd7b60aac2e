use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ResolvedPost, Split};
use crate::error::{Error, Result};
use crate::masking::DEFAULT_MASK_TOKEN;
use crate::rationale::{training_target, AttentionStrategy, NormalAttention};

use super::grad::{batch_loss_encoded, encode, gradients_encoded, TrainingExample};
use super::{LossBreakdown, ModelParams, Vocab};

const INIT_RANGE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the attention loss.
    pub lambda: f64,
    pub strategy: AttentionStrategy,
    pub normal_attention: NormalAttention,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Embedding width.
    pub dim: usize,
    /// Reserved vocabulary row for masked tokens.
    pub mask_token: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            strategy: AttentionStrategy::Normal,
            normal_attention: NormalAttention::Uniform,
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 16,
            seed: 42,
            dim: 16,
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            problems.push(format!("lambda must be a finite value >= 0 (got {})", self.lambda));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be > 0 (got {})", self.learning_rate));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".into());
        }
        if self.dim == 0 {
            problems.push("dim must be positive".into());
        }
        if self.mask_token.is_empty() {
            problems.push("mask_token must be non-empty".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean training loss over the train split: entry 0 at initialization,
    /// entry `e` after epoch `e`.
    pub history: Vec<LossBreakdown>,
}

/// Supervision for each post under the configured strategy.
pub fn training_examples<'a>(
    posts: impl IntoIterator<Item = &'a ResolvedPost>,
    config: &TrainConfig,
) -> Vec<TrainingExample> {
    posts
        .into_iter()
        .map(|post| TrainingExample {
            tokens: post.tokens().to_vec(),
            label: post.gold_label,
            target: training_target(post, config.strategy, config.normal_attention),
        })
        .collect()
}

pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<ModelParams> {
    train_with_history(corpus, config).map(|outcome| outcome.params)
}

/// Mini-batch gradient descent over the train split. Initialization and
/// shuffling draw from one generator seeded with `config.seed`.
pub fn train_with_history(corpus: &Corpus, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let posts: Vec<&ResolvedPost> = corpus.split(Split::Train).collect();
    if posts.is_empty() {
        return Err(Error::Empty("train split"));
    }
    let examples = training_examples(posts.iter().copied(), config);
    let vocab = Vocab::build(
        examples.iter().flat_map(|ex| ex.tokens.iter().map(String::as_str)),
        &config.mask_token,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::zeros(vocab, config.dim);
    for p in params.parameters_mut() {
        *p = (rng.random::<f64>() * 2.0 - 1.0) * INIT_RANGE;
    }

    let encoded = encode(&params, &examples);
    let mut history = vec![batch_loss_encoded(&params, &encoded, config.lambda)];
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| encoded[i].clone()));
            gradients_encoded(&params, &batch, config.lambda).apply(&mut params, config.learning_rate);
        }
        history.push(batch_loss_encoded(&params, &encoded, config.lambda));
    }
    Ok(TrainOutcome { params, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnnotatorRecord, Label, Post};

    fn tiny_corpus() -> Corpus {
        let posts = (0..12)
            .map(|i| {
                let toxic = i % 2 == 0;
                let tokens = if toxic { vec!["zork", "you", "all"] } else { vec!["hello", "you", "all"] };
                let label = if toxic { Label::Offensive } else { Label::Normal };
                let rationale = toxic.then(|| vec![true, false, false]);
                ResolvedPost::resolve(Post {
                    id: format!("p{i}"),
                    tokens: tokens.into_iter().map(String::from).collect(),
                    split: Split::Train,
                    annotators: vec![AnnotatorRecord::new(label, rationale, &[]); 3],
                })
                .unwrap()
            })
            .collect();
        Corpus::from_resolved(posts).unwrap()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let corpus = tiny_corpus();
        let config = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let outcome = train_with_history(&corpus, &config).unwrap();
        assert_eq!(outcome.history.len(), 1);
        assert!(outcome.params.parameters().all(|p| p.abs() <= INIT_RANGE));
        let again = train(&corpus, &config).unwrap();
        assert_eq!(outcome.params, again);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let corpus = tiny_corpus();
        let config = TrainConfig { epochs: 3, batch_size: 5, ..TrainConfig::default() };
        let a = train(&corpus, &config).unwrap();
        let b = train(&corpus, &config).unwrap();
        assert!(a.parameters().zip(b.parameters()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = train(&corpus, &TrainConfig { seed: 7, ..config }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_config_and_empty_split() {
        let corpus = tiny_corpus();
        let bad = TrainConfig { learning_rate: 0.0, batch_size: 0, ..TrainConfig::default() };
        match train(&corpus, &bad) {
            Err(Error::Config(problems)) => assert_eq!(problems.len(), 2),
            other => panic!("expected config error, got {other:?}"),
        }
        assert!(matches!(
            train(&Corpus::default(), &TrainConfig::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn learns_the_marker_token() {
        let corpus = tiny_corpus();
        let config = TrainConfig { epochs: 30, learning_rate: 0.5, lambda: 1.0, ..TrainConfig::default() };
        let outcome = train_with_history(&corpus, &config).unwrap();
        assert!(outcome.history.last().unwrap().l_total < outcome.history[0].l_total);
        let pred = outcome.params.forward(&["zork", "you", "all"]);
        assert_eq!(pred.label(), Label::Offensive);
        assert!(pred.attention[0] > pred.attention[1]);
    }
}
