//! Compact attention classifier.
//!
//! Each token has an embedding row. A single learned query scores the tokens
//! (scaled dot product), the softmax of those scores is the model attention,
//! and the attention-weighted context vector feeds a 3-way linear classifier.
//!
//! ```text
//! score_i   = q · E[t_i] / sqrt(d)
//! attention = softmax(score)
//! context   = Σ_i attention_i · E[t_i]
//! probs     = softmax(W · context + b)
//! ```

mod checkpoint;
mod grad;
mod train;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::rationale::{softmax, AttentionTarget};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use grad::{batch_loss, gradients, Gradients, TrainingExample};
pub use train::{train, train_with_history, training_examples, TrainConfig, TrainOutcome};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

pub const OOV_TOKEN: &str = "<oov>";

/// Token ↔ row mapping. Row 0 is the out-of-vocabulary row, row 1 the mask token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const OOV: usize = 0;

    /// Builds a sorted vocabulary over `tokens` plus the reserved rows.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, mask_token: &str) -> Vocab {
        let mut rest: Vec<&str> = tokens
            .into_iter()
            .filter(|t| *t != OOV_TOKEN && *t != mask_token)
            .collect();
        rest.sort_unstable();
        rest.dedup();
        let mut all = vec![OOV_TOKEN.to_string(), mask_token.to_string()];
        all.extend(rest.into_iter().map(str::to_string));
        Self::from_tokens(all).expect("reserved tokens are distinct")
    }

    /// Rebuilds a vocabulary from its row order; rejects duplicates and a
    /// missing out-of-vocabulary row.
    pub fn from_tokens(tokens: Vec<String>) -> Option<Vocab> {
        if tokens.first().map(String::as_str) != Some(OOV_TOKEN) || tokens.len() < 2 {
            return None;
        }
        let index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        (index.len() == tokens.len()).then_some(Vocab { tokens, index })
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::OOV)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn mask_token(&self) -> &str {
        &self.tokens[1]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Parameters of the classifier. Matrices are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub vocab: Vocab,
    pub dim: usize,
    /// `vocab.len() × dim`
    pub embeddings: Vec<f64>,
    /// `dim`
    pub query: Vec<f64>,
    /// `3 × dim`
    pub classifier: Vec<f64>,
    /// `3`
    pub bias: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(vocab: Vocab, dim: usize) -> ModelParams {
        assert!(dim > 0, "embedding width must be positive");
        let v = vocab.len();
        ModelParams {
            vocab,
            dim,
            embeddings: vec![0.0; v * dim],
            query: vec![0.0; dim],
            classifier: vec![0.0; Label::COUNT * dim],
            bias: vec![0.0; Label::COUNT],
        }
    }

    pub fn embedding(&self, id: usize) -> &[f64] {
        &self.embeddings[id * self.dim..(id + 1) * self.dim]
    }

    pub fn num_parameters(&self) -> usize {
        self.embeddings.len() + self.query.len() + self.classifier.len() + self.bias.len()
    }

    /// Every parameter in the order embeddings, query, classifier, bias.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.embeddings
            .iter_mut()
            .chain(self.query.iter_mut())
            .chain(self.classifier.iter_mut())
            .chain(self.bias.iter_mut())
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.embeddings
            .iter()
            .chain(self.query.iter())
            .chain(self.classifier.iter())
            .chain(self.bias.iter())
    }

    pub(crate) fn shapes_consistent(&self) -> bool {
        self.dim > 0
            && self.embeddings.len() == self.vocab.len() * self.dim
            && self.query.len() == self.dim
            && self.classifier.len() == Label::COUNT * self.dim
            && self.bias.len() == Label::COUNT
    }

    pub fn forward<S: AsRef<str>>(&self, tokens: &[S]) -> Prediction {
        assert!(!tokens.is_empty(), "forward over an empty post");
        self.forward_ids(&self.vocab.encode(tokens)).prediction()
    }

    /// Forward pass over the tokens whose `keep_mask` entry is set. With
    /// nothing kept, the prediction is uniform over labels with empty attention.
    pub fn predict_with_erasure<S: AsRef<str>>(&self, tokens: &[S], keep_mask: &[bool]) -> Prediction {
        assert_eq!(tokens.len(), keep_mask.len(), "keep mask length");
        let ids: Vec<usize> = tokens
            .iter()
            .zip(keep_mask)
            .filter(|(_, &keep)| keep)
            .map(|(t, _)| self.vocab.id(t.as_ref()))
            .collect();
        self.forward_ids(&ids).prediction()
    }

    pub(crate) fn forward_ids(&self, ids: &[usize]) -> ForwardCache {
        if ids.is_empty() {
            return ForwardCache {
                attention: Vec::new(),
                context: vec![0.0; self.dim],
                probs: [1.0 / 3.0; 3],
            };
        }
        let scale = (self.dim as f64).sqrt();
        let scores: Vec<f64> = ids
            .iter()
            .map(|&id| dot(&self.query, self.embedding(id)) / scale)
            .collect();
        let attention = softmax(&scores);
        let mut context = vec![0.0; self.dim];
        for (&id, &a) in ids.iter().zip(&attention) {
            for (c, e) in context.iter_mut().zip(self.embedding(id)) {
                *c += a * e;
            }
        }
        let logits: Vec<f64> = (0..Label::COUNT)
            .map(|k| dot(&self.classifier[k * self.dim..(k + 1) * self.dim], &context) + self.bias[k])
            .collect();
        let p = softmax(&logits);
        ForwardCache {
            attention,
            context,
            probs: [p[0], p[1], p[2]],
        }
    }
}

pub(crate) struct ForwardCache {
    pub attention: Vec<f64>,
    pub context: Vec<f64>,
    pub probs: [f64; 3],
}

impl ForwardCache {
    fn prediction(self) -> Prediction {
        Prediction {
            probs: self.probs,
            attention: self.attention,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Class probabilities (indexed by [`Label::index`]) and token attention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: [f64; 3],
    pub attention: Vec<f64>,
}

impl Prediction {
    pub fn prob(&self, label: Label) -> f64 {
        self.probs[label.index()]
    }

    /// Most probable label; ties go to the lower index.
    pub fn label(&self) -> Label {
        let mut best = 0;
        for k in 1..Label::COUNT {
            if self.probs[k] > self.probs[best] {
                best = k;
            }
        }
        Label::from_index(best).expect("three labels")
    }

    /// `1 - p(normal)`.
    pub fn toxicity(&self) -> f64 {
        1.0 - self.prob(Label::Normal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_pred: f64,
    pub l_att: f64,
    pub l_total: f64,
}

/// Cross-entropy of the gold label plus `lambda` times the cross-entropy of
/// the model attention against the target.
pub fn loss(pred: &Prediction, gold: Label, target: &AttentionTarget, lambda: f64) -> LossBreakdown {
    let l_pred = prediction_loss(&pred.probs, gold);
    let l_att = attention_loss(&pred.attention, target.weights());
    LossBreakdown {
        l_pred,
        l_att,
        l_total: l_pred + lambda * l_att,
    }
}

pub(crate) fn prediction_loss(probs: &[f64; 3], gold: Label) -> f64 {
    -probs[gold.index()].max(PROB_FLOOR).ln()
}

pub(crate) fn attention_loss(attention: &[f64], target: &[f64]) -> f64 {
    assert_eq!(attention.len(), target.len(), "attention target length");
    -target
        .iter()
        .zip(attention)
        .map(|(t, a)| t * a.max(PROB_FLOOR).ln())
        .sum::<f64>()
}
