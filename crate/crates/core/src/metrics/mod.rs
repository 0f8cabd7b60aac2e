//! Performance, bias and explainability metrics, and the combined report.

pub mod bias;
pub mod explain;
pub mod performance;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, ResolvedPost};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Prediction};

pub use bias::{bias_metrics, bnsp_auc, bpsn_auc, subgroup_auc, BiasMetrics, BiasSample, CommunityBias};
pub use explain::{
    auprc_per_post, auprc_soft, average_precision, comprehensiveness, extract_rationale, iou, iou_f1,
    sufficiency, token_f1, DiscreteRationale,
};
pub use performance::{accuracy, auroc_binary, auroc_multiclass, confusion_matrix, macro_f1};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// One-vs-rest macro average; absent with a single gold class.
    pub auroc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainabilityMetrics {
    /// Toxic-gold posts the values below are computed over.
    pub evaluated_posts: usize,
    pub iou_f1: Option<f64>,
    pub token_f1: Option<f64>,
    /// Tokens pooled across posts.
    pub auprc: Option<f64>,
    /// Mean of per-post values.
    pub auprc_per_post: Option<f64>,
    pub comprehensiveness: Option<f64>,
    pub sufficiency: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub performance: PerformanceMetrics,
    pub bias: BiasMetrics,
    pub explainability: ExplainabilityMetrics,
}

pub fn predict_all(params: &ModelParams, posts: &[ResolvedPost]) -> Vec<Prediction> {
    posts.iter().map(|p| params.forward(p.tokens())).collect()
}

/// Scores `posts` with the model. Plausibility and faithfulness use the
/// top-`k` attention tokens of toxic-gold posts against the annotator union.
pub fn evaluate(params: &ModelParams, posts: &[ResolvedPost], k: usize) -> Result<EvalReport> {
    if posts.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let preds = predict_all(params, posts);
    Ok(report_from_predictions(params, posts, &preds, k))
}

pub(crate) fn report_from_predictions(
    params: &ModelParams,
    posts: &[ResolvedPost],
    preds: &[Prediction],
    k: usize,
) -> EvalReport {
    let golds: Vec<Label> = posts.iter().map(|p| p.gold_label).collect();
    let labels: Vec<Label> = preds.iter().map(Prediction::label).collect();
    let probs: Vec<[f64; 3]> = preds.iter().map(|p| p.probs).collect();
    let performance = PerformanceMetrics {
        accuracy: accuracy(&labels, &golds).expect("aligned, non-empty"),
        macro_f1: macro_f1(&labels, &golds).expect("aligned, non-empty"),
        auroc: auroc_multiclass(&probs, &golds).ok(),
    };

    let samples: Vec<BiasSample> = posts
        .iter()
        .zip(preds)
        .map(|(post, pred)| BiasSample {
            toxic: post.gold_label.is_toxic(),
            score: pred.toxicity(),
            communities: post.gold_targets.clone(),
        })
        .collect();

    EvalReport {
        performance,
        bias: bias_metrics(&samples),
        explainability: explainability(params, posts, preds, k),
    }
}

fn explainability(
    params: &ModelParams,
    posts: &[ResolvedPost],
    preds: &[Prediction],
    k: usize,
) -> ExplainabilityMetrics {
    let toxic: Vec<(&ResolvedPost, &Prediction)> = posts
        .iter()
        .zip(preds)
        .filter(|(p, _)| p.gold_label.is_toxic())
        .collect();
    if toxic.is_empty() {
        return ExplainabilityMetrics {
            evaluated_posts: 0,
            iou_f1: None,
            token_f1: None,
            auprc: None,
            auprc_per_post: None,
            comprehensiveness: None,
            sufficiency: None,
        };
    }
    let extracted: Vec<DiscreteRationale> = toxic
        .iter()
        .map(|(_, pred)| extract_rationale(&pred.attention, k))
        .collect();
    let gold: Vec<DiscreteRationale> = toxic
        .iter()
        .map(|(post, _)| DiscreteRationale::from_mask(&post.gold_rationale_union))
        .collect();
    let attentions: Vec<&[f64]> = toxic.iter().map(|(_, pred)| pred.attention.as_slice()).collect();
    let gold_masks: Vec<&[bool]> = toxic
        .iter()
        .map(|(post, _)| post.gold_rationale_union.as_slice())
        .collect();
    let n = toxic.len() as f64;
    let comp = toxic
        .iter()
        .zip(&extracted)
        .map(|((post, _), r)| comprehensiveness(params, post.tokens(), r))
        .sum::<f64>()
        / n;
    let suff = toxic
        .iter()
        .zip(&extracted)
        .map(|((post, _), r)| sufficiency(params, post.tokens(), r))
        .sum::<f64>()
        / n;
    ExplainabilityMetrics {
        evaluated_posts: toxic.len(),
        iou_f1: Some(iou_f1(&extracted, &gold)),
        token_f1: Some(token_f1(&extracted, &gold)),
        auprc: auprc_soft(&attentions, &gold_masks),
        auprc_per_post: auprc_per_post(&attentions, &gold_masks),
        comprehensiveness: Some(comp),
        sufficiency: Some(suff),
    }
}
