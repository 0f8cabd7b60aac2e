//! Analytic gradients of the mean joint loss over a batch.

use crate::corpus::Label;
use crate::rationale::AttentionTarget;

use super::{attention_loss, dot, prediction_loss, LossBreakdown, ModelParams};

/// One supervised post. `target` is `None` when the attention loss is skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub tokens: Vec<String>,
    pub label: Label,
    pub target: Option<AttentionTarget>,
}

/// Token ids resolved against a fixed vocabulary.
#[derive(Clone, Debug)]
pub(crate) struct Encoded<'a> {
    pub ids: Vec<usize>,
    pub label: Label,
    pub target: Option<&'a [f64]>,
}

pub(crate) fn encode<'a>(params: &ModelParams, batch: &'a [TrainingExample]) -> Vec<Encoded<'a>> {
    batch
        .iter()
        .map(|ex| {
            assert!(!ex.tokens.is_empty(), "training example without tokens");
            if let Some(t) = &ex.target {
                assert_eq!(t.len(), ex.tokens.len(), "attention target length");
            }
            Encoded {
                ids: params.vocab.encode(&ex.tokens),
                label: ex.label,
                target: ex.target.as_ref().map(|t| t.weights()),
            }
        })
        .collect()
}

/// Parameter-shaped gradient record (same layout as [`ModelParams`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub embeddings: Vec<f64>,
    pub query: Vec<f64>,
    pub classifier: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            embeddings: vec![0.0; params.embeddings.len()],
            query: vec![0.0; params.query.len()],
            classifier: vec![0.0; params.classifier.len()],
            bias: vec![0.0; params.bias.len()],
        }
    }

    /// Same ordering as [`ModelParams::parameters`].
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.embeddings
            .iter()
            .chain(self.query.iter())
            .chain(self.classifier.iter())
            .chain(self.bias.iter())
    }

    fn scale(&mut self, factor: f64) {
        for g in self
            .embeddings
            .iter_mut()
            .chain(self.query.iter_mut())
            .chain(self.classifier.iter_mut())
            .chain(self.bias.iter_mut())
        {
            *g *= factor;
        }
    }

    /// `params -= learning_rate * self`
    pub fn apply(&self, params: &mut ModelParams, learning_rate: f64) {
        for (p, g) in params.parameters_mut().zip(self.iter()) {
            *p -= learning_rate * g;
        }
    }
}

/// Exact gradient of the mean `l_pred + lambda * l_att` over `batch`.
pub fn gradients(params: &ModelParams, batch: &[TrainingExample], lambda: f64) -> Gradients {
    assert!(!batch.is_empty(), "gradient of an empty batch");
    gradients_encoded(params, &encode(params, batch), lambda)
}

pub(crate) fn gradients_encoded(params: &ModelParams, batch: &[Encoded<'_>], lambda: f64) -> Gradients {
    let d = params.dim;
    let scale = (d as f64).sqrt();
    let mut grads = Gradients::zeros_like(params);
    let mut d_context = vec![0.0; d];

    for ex in batch {
        let fwd = params.forward_ids(&ex.ids);

        // softmax + cross-entropy at the classifier
        let mut d_logits = fwd.probs;
        d_logits[ex.label.index()] -= 1.0;
        d_context.iter_mut().for_each(|x| *x = 0.0);
        for (k, &g) in d_logits.iter().enumerate() {
            grads.bias[k] += g;
            let row = k * d..(k + 1) * d;
            for (gw, c) in grads.classifier[row.clone()].iter_mut().zip(&fwd.context) {
                *gw += g * c;
            }
            for (dc, w) in d_context.iter_mut().zip(&params.classifier[row]) {
                *dc += g * w;
            }
        }

        // context = Σ a_i e_i, so dL/da_i = e_i · dcontext; through the
        // attention softmax, dL/ds_i = a_i (e_i · dc − context · dc).
        let context_dot = dot(&fwd.context, &d_context);
        let target_mass: f64 = ex.target.map_or(0.0, |t| t.iter().sum());
        for (i, (&id, &a)) in ex.ids.iter().zip(&fwd.attention).enumerate() {
            let row = id * d..(id + 1) * d;
            let e = &params.embeddings[row.clone()];
            let mut d_score = a * (dot(e, &d_context) - context_dot);
            if let Some(t) = ex.target {
                // cross-entropy against a softmax: a_i Σ_j t_j − t_i
                d_score += lambda * (a * target_mass - t[i]);
            }
            let d_score = d_score / scale;
            for (gq, ev) in grads.query.iter_mut().zip(e) {
                *gq += d_score * ev;
            }
            for ((ge, q), dc) in grads.embeddings[row]
                .iter_mut()
                .zip(&params.query)
                .zip(&d_context)
            {
                *ge += a * dc + d_score * q;
            }
        }
    }

    grads.scale(1.0 / batch.len() as f64);
    grads
}

/// Mean loss components over `batch`; skipped targets contribute zero attention loss.
pub fn batch_loss(params: &ModelParams, batch: &[TrainingExample], lambda: f64) -> LossBreakdown {
    assert!(!batch.is_empty(), "loss of an empty batch");
    batch_loss_encoded(params, &encode(params, batch), lambda)
}

pub(crate) fn batch_loss_encoded(params: &ModelParams, batch: &[Encoded<'_>], lambda: f64) -> LossBreakdown {
    let mut l_pred = 0.0;
    let mut l_att = 0.0;
    for ex in batch {
        let fwd = params.forward_ids(&ex.ids);
        l_pred += prediction_loss(&fwd.probs, ex.label);
        if let Some(t) = ex.target {
            l_att += attention_loss(&fwd.attention, t);
        }
    }
    let n = batch.len() as f64;
    let (l_pred, l_att) = (l_pred / n, l_att / n);
    LossBreakdown {
        l_pred,
        l_att,
        l_total: l_pred + lambda * l_att,
    }
}
