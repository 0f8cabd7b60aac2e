//! Error analysis: confusion matrix and misclassification counts per
//! target community and per gold class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, ResolvedPost};
use crate::error::{Error, Result};
use crate::metrics::confusion_matrix;
use crate::model::{ModelParams, Prediction};
use crate::report::table_from_rows;

pub const TOP_COMMUNITIES: usize = 10;

pub const COUNTING_RULE: &str =
    "a misclassified post increments every community in its gold targets";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    /// `confusion_matrix[gold][predicted]`, labels in hatespeech, offensive, normal order.
    pub confusion_matrix: [[usize; 3]; 3],
    /// Every community in the split's gold targets, including zero counts.
    pub per_community_misclassifications: BTreeMap<String, usize>,
    /// Communities with at least one error, by count descending then name.
    pub top_communities: Vec<(String, usize)>,
    /// Misclassified posts per gold class.
    pub class_misclassifications: BTreeMap<Label, usize>,
    pub counting_rule: String,
}

pub fn error_analysis(params: &ModelParams, posts: &[ResolvedPost]) -> Result<ErrorAnalysis> {
    if posts.is_empty() {
        return Err(Error::Empty("analysis split"));
    }
    let preds: Vec<Prediction> = posts.iter().map(|p| params.forward(p.tokens())).collect();
    Ok(analysis_from_predictions(posts, &preds))
}

pub(crate) fn analysis_from_predictions(posts: &[ResolvedPost], preds: &[Prediction]) -> ErrorAnalysis {
    let predicted: Vec<Label> = preds.iter().map(Prediction::label).collect();
    analyse_labels(posts, &predicted)
}

/// Analysis from already predicted labels.
pub fn analyse_labels(posts: &[ResolvedPost], predicted: &[Label]) -> ErrorAnalysis {
    let golds: Vec<Label> = posts.iter().map(|p| p.gold_label).collect();
    let matrix = confusion_matrix(predicted, &golds).expect("aligned, non-empty");

    let mut per_community: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_class: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
    for (post, &pred) in posts.iter().zip(predicted) {
        let wrong = pred != post.gold_label;
        for community in &post.gold_targets {
            *per_community.entry(community.clone()).or_default() += usize::from(wrong);
        }
        if wrong {
            *per_class.get_mut(&post.gold_label).expect("all labels") += 1;
        }
    }
    let mut top: Vec<(String, usize)> = per_community
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(c, &n)| (c.clone(), n))
        .collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top.truncate(TOP_COMMUNITIES);

    ErrorAnalysis {
        confusion_matrix: matrix,
        per_community_misclassifications: per_community,
        top_communities: top,
        class_misclassifications: per_class,
        counting_rule: COUNTING_RULE.to_string(),
    }
}

impl ErrorAnalysis {
    /// 3×3 grid with gold labels as rows.
    pub fn confusion_csv(&self) -> Result<String> {
        let rows = Label::ALL
            .iter()
            .map(|gold| {
                let mut row = vec![gold.to_string()];
                row.extend(self.confusion_matrix[gold.index()].iter().map(|n| n.to_string()));
                row
            })
            .collect();
        table_from_rows(&["gold \\ predicted", "hatespeech", "offensive", "normal"], rows)
    }

    /// Bar data: all communities with their counts and a top-10 rank column.
    pub fn community_csv(&self) -> Result<String> {
        let rank: BTreeMap<&str, usize> = self
            .top_communities
            .iter()
            .enumerate()
            .map(|(i, (c, _))| (c.as_str(), i + 1))
            .collect();
        let mut rows: Vec<(String, usize)> = self
            .per_community_misclassifications
            .iter()
            .map(|(c, &n)| (c.clone(), n))
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let rows = rows
            .into_iter()
            .map(|(c, n)| {
                let r = rank.get(c.as_str()).map(|r| r.to_string()).unwrap_or_default();
                vec![c, n.to_string(), r]
            })
            .collect();
        table_from_rows(&["community", "misclassifications", "top_rank"], rows)
    }

    pub fn class_csv(&self) -> Result<String> {
        let rows = self
            .class_misclassifications
            .iter()
            .map(|(label, n)| vec![label.to_string(), n.to_string()])
            .collect();
        table_from_rows(&["gold class", "misclassifications"], rows)
    }
}
