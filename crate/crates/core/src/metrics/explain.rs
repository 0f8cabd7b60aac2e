//! Plausibility (agreement with human rationales) and faithfulness
//! (influence of the rationale on the model's own prediction).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;

/// Token positions selected from an attention vector.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteRationale(BTreeSet<usize>);

impl DiscreteRationale {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        DiscreteRationale(indices.into_iter().collect())
    }

    /// Positions set in a binary mask.
    pub fn from_mask(mask: &[bool]) -> Self {
        Self::new(mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i))
    }

    pub fn indices(&self) -> &BTreeSet<usize> {
        &self.0
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The `k` highest-weighted positions; ties go to the lower index.
pub fn extract_rationale(attention: &[f64], k: usize) -> DiscreteRationale {
    let mut order: Vec<usize> = (0..attention.len()).collect();
    order.sort_by(|&a, &b| attention[b].total_cmp(&attention[a]).then(a.cmp(&b)));
    DiscreteRationale::new(order.into_iter().take(k))
}

pub fn iou(pred: &DiscreteRationale, gold: &DiscreteRationale) -> f64 {
    let union = pred.0.union(&gold.0).count();
    if union == 0 {
        return 0.0;
    }
    pred.0.intersection(&gold.0).count() as f64 / union as f64
}

pub const IOU_MATCH_THRESHOLD: f64 = 0.5;

/// F1 over per-post matches, where a post matches when IOU ≥ 0.5.
/// Precision divides by posts with a non-empty prediction, recall by posts
/// with a non-empty gold rationale.
pub fn iou_f1(preds: &[DiscreteRationale], golds: &[DiscreteRationale]) -> f64 {
    assert_eq!(preds.len(), golds.len(), "rationale sets are not aligned");
    let matches = preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| iou(p, g) >= IOU_MATCH_THRESHOLD)
        .count() as f64;
    let n_pred = preds.iter().filter(|p| !p.is_empty()).count();
    let n_gold = golds.iter().filter(|g| !g.is_empty()).count();
    if n_pred == 0 || n_gold == 0 || matches == 0.0 {
        return 0.0;
    }
    let precision = matches / n_pred as f64;
    let recall = matches / n_gold as f64;
    2.0 * precision * recall / (precision + recall)
}

fn post_token_f1(pred: &DiscreteRationale, gold: &DiscreteRationale) -> f64 {
    let overlap = pred.0.intersection(&gold.0).count() as f64;
    if overlap == 0.0 {
        return 0.0;
    }
    let precision = overlap / pred.len() as f64;
    let recall = overlap / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Per-post token F1, averaged over posts (0 for no posts).
pub fn token_f1(preds: &[DiscreteRationale], golds: &[DiscreteRationale]) -> f64 {
    assert_eq!(preds.len(), golds.len(), "rationale sets are not aligned");
    if preds.is_empty() {
        return 0.0;
    }
    preds
        .iter()
        .zip(golds)
        .map(|(p, g)| post_token_f1(p, g))
        .sum::<f64>()
        / preds.len() as f64
}

/// Step-wise area under the precision–recall curve: Σ (R_k − R_{k−1}) P_k
/// over descending distinct score thresholds. `None` without positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        tp += order[start..end].iter().filter(|&&i| labels[i]).count();
        seen += end - start;
        let recall = tp as f64 / n_pos as f64;
        area += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
        start = end;
    }
    Some(area)
}

/// Average precision with tokens pooled across posts.
pub fn auprc_soft<A: AsRef<[f64]>, G: AsRef<[bool]>>(attentions: &[A], golds: &[G]) -> Option<f64> {
    assert_eq!(attentions.len(), golds.len(), "posts are not aligned");
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (a, g) in attentions.iter().zip(golds) {
        assert_eq!(a.as_ref().len(), g.as_ref().len(), "attention and gold lengths differ");
        scores.extend_from_slice(a.as_ref());
        labels.extend_from_slice(g.as_ref());
    }
    average_precision(&scores, &labels)
}

/// Average precision per post, averaged over posts with at least one gold token.
pub fn auprc_per_post<A: AsRef<[f64]>, G: AsRef<[bool]>>(attentions: &[A], golds: &[G]) -> Option<f64> {
    assert_eq!(attentions.len(), golds.len(), "posts are not aligned");
    let values: Vec<f64> = attentions
        .iter()
        .zip(golds)
        .filter_map(|(a, g)| average_precision(a.as_ref(), g.as_ref()))
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Drop in the predicted class's probability when the rationale is erased.
pub fn comprehensiveness<S: AsRef<str>>(
    params: &ModelParams,
    tokens: &[S],
    rationale: &DiscreteRationale,
) -> f64 {
    let full = params.forward(tokens);
    let class = full.label();
    let keep: Vec<bool> = (0..tokens.len()).map(|i| !rationale.contains(i)).collect();
    full.prob(class) - params.predict_with_erasure(tokens, &keep).prob(class)
}

/// Drop in the predicted class's probability when only the rationale is kept.
pub fn sufficiency<S: AsRef<str>>(
    params: &ModelParams,
    tokens: &[S],
    rationale: &DiscreteRationale,
) -> f64 {
    let full = params.forward(tokens);
    let class = full.label();
    let keep: Vec<bool> = (0..tokens.len()).map(|i| rationale.contains(i)).collect();
    full.prob(class) - params.predict_with_erasure(tokens, &keep).prob(class)
}
