//! Ground-truth attention from annotator rationales.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, ResolvedPost};
use crate::error::{Error, Result};

/// How per-annotator rationale vectors are combined before normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionStrategy {
    /// Elementwise mean over annotators.
    #[default]
    Normal,
    /// A token counts only if every annotator marked it.
    Conservative,
    /// A token counts if any annotator marked it.
    Lenient,
}

impl AttentionStrategy {
    pub const ALL: [AttentionStrategy; 3] = [
        AttentionStrategy::Normal,
        AttentionStrategy::Conservative,
        AttentionStrategy::Lenient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttentionStrategy::Normal => "normal",
            AttentionStrategy::Conservative => "conservative",
            AttentionStrategy::Lenient => "lenient",
        }
    }
}

impl fmt::Display for AttentionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttentionStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "normal" => Ok(AttentionStrategy::Normal),
            "conservative" => Ok(AttentionStrategy::Conservative),
            "lenient" => Ok(AttentionStrategy::Lenient),
            other => Err(format!(
                "unknown attention strategy {other:?} (expected normal, conservative or lenient)"
            )),
        }
    }
}

/// What the attention target of a Normal-labelled post is.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalAttention {
    /// Uniform target; the attention loss still applies.
    #[default]
    Uniform,
    /// No target; the attention loss is not computed for the post.
    Skip,
}

impl FromStr for NormalAttention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(NormalAttention::Uniform),
            "skip" => Ok(NormalAttention::Skip),
            other => Err(format!("unknown normal_attention {other:?} (expected uniform or skip)")),
        }
    }
}

/// A probability distribution over a post's tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionTarget {
    weights: Vec<f64>,
}

impl AttentionTarget {
    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "attention over zero tokens");
        AttentionTarget {
            weights: vec![1.0 / len as f64; len],
        }
    }

    /// Wraps weights that are already a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("attention weights"));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Undefined("attention weights are not a distribution"));
        }
        Ok(AttentionTarget { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

/// Combines equal-length binary rationales into one raw importance vector.
pub fn combine_rationales<R: AsRef<[bool]>>(
    rationales: &[R],
    strategy: AttentionStrategy,
) -> Result<Vec<f64>> {
    let first = rationales
        .first()
        .ok_or(Error::Empty("rationale set"))?
        .as_ref();
    let len = first.len();
    for r in rationales {
        if r.as_ref().len() != len {
            return Err(Error::LengthMismatch {
                left: len,
                right: r.as_ref().len(),
            });
        }
    }
    let n = rationales.len() as f64;
    let combined = (0..len)
        .map(|i| {
            let marks = rationales.iter().filter(|r| r.as_ref()[i]).count();
            match strategy {
                AttentionStrategy::Normal => marks as f64 / n,
                AttentionStrategy::Conservative => f64::from(u8::from(marks == rationales.len())),
                AttentionStrategy::Lenient => f64::from(u8::from(marks > 0)),
            }
        })
        .collect();
    Ok(combined)
}

/// Softmax with max subtraction.
pub fn softmax(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn softmax_normalize(raw: &[f64]) -> AttentionTarget {
    assert!(!raw.is_empty(), "softmax of an empty vector");
    AttentionTarget {
        weights: softmax(raw),
    }
}

/// Ground-truth attention plus whether the post fell back to uniform
/// because its combined rationale was empty.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub target: AttentionTarget,
    pub degenerate: bool,
}

/// Attention target for a resolved post. Normal posts are deactivated to
/// the uniform distribution.
pub fn ground_truth_attention(post: &ResolvedPost, strategy: AttentionStrategy) -> GroundTruth {
    let len = post.tokens().len();
    if post.gold_label == Label::Normal {
        return GroundTruth {
            target: AttentionTarget::uniform(len),
            degenerate: false,
        };
    }
    let rationales = post.post.rationales();
    let raw = if rationales.is_empty() {
        vec![0.0; len]
    } else {
        combine_rationales(&rationales, strategy).expect("validated rationale lengths")
    };
    let degenerate = raw.iter().all(|&x| x == 0.0);
    GroundTruth {
        target: softmax_normalize(&raw),
        degenerate,
    }
}

/// Target used in the attention loss, or `None` when the loss is skipped.
pub fn training_target(
    post: &ResolvedPost,
    strategy: AttentionStrategy,
    normal_attention: NormalAttention,
) -> Option<AttentionTarget> {
    if post.gold_label == Label::Normal && normal_attention == NormalAttention::Skip {
        return None;
    }
    Some(ground_truth_attention(post, strategy).target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnnotatorRecord, Post, Split};
    use approx::assert_abs_diff_eq;

    fn bits(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&b| b == 1).collect()
    }

    fn example_rationales() -> Vec<Vec<bool>> {
        vec![bits(&[1, 0, 1, 0]), bits(&[1, 0, 0, 0]), bits(&[1, 1, 0, 0])]
    }

    /// Independent scalar softmax without stabilization; inputs are in [0, 1].
    fn naive_softmax(raw: &[f64]) -> Vec<f64> {
        let z: f64 = raw.iter().map(|x| x.exp()).sum();
        raw.iter().map(|x| x.exp() / z).collect()
    }

    #[test]
    fn combine_by_strategy() {
        let r = example_rationales();
        let normal = combine_rationales(&r, AttentionStrategy::Normal).unwrap();
        for (got, want) in normal.iter().zip([1.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert_eq!(
            combine_rationales(&r, AttentionStrategy::Conservative).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            combine_rationales(&r, AttentionStrategy::Lenient).unwrap(),
            vec![1.0, 1.0, 1.0, 0.0]
        );
    }

    #[test]
    fn combine_rejects_unequal_lengths() {
        let r = vec![bits(&[1, 0]), bits(&[1])];
        assert!(matches!(
            combine_rationales(&r, AttentionStrategy::Normal),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
        let empty: Vec<Vec<bool>> = vec![];
        assert!(combine_rationales(&empty, AttentionStrategy::Lenient).is_err());
    }

    #[test]
    fn softmax_examples() {
        let cases: [(&[f64], [f64; 4]); 3] = [
            (&[1.0, 1.0 / 3.0, 1.0 / 3.0, 0.0], [0.4176, 0.2144, 0.2144, 0.1536]),
            (&[0.0; 4], [0.25; 4]),
            (&[1.0, 1.0, 1.0, 0.0], [0.2969, 0.2969, 0.2969, 0.1092]),
        ];
        for (raw, rounded) in cases {
            let got = softmax_normalize(raw);
            let oracle = naive_softmax(raw);
            for ((g, o), r) in got.weights().iter().zip(&oracle).zip(rounded) {
                assert_abs_diff_eq!(*g, *o, epsilon = 1e-14);
                assert_abs_diff_eq!(*g, r, epsilon = 5e-5);
            }
        }
    }

    fn resolved(label: Label, rationales: Vec<Vec<bool>>, len: usize) -> ResolvedPost {
        let annotators = if rationales.is_empty() {
            vec![AnnotatorRecord::new(label, None, &[]); 3]
        } else {
            rationales
                .into_iter()
                .map(|r| AnnotatorRecord::new(label, Some(r), &[]))
                .collect()
        };
        ResolvedPost::resolve(Post {
            id: "p".into(),
            tokens: (0..len).map(|i| format!("w{i}")).collect(),
            split: Split::Train,
            annotators,
        })
        .unwrap()
    }

    #[test]
    fn normal_posts_are_uniform() {
        let post = resolved(Label::Normal, vec![], 5);
        for strategy in AttentionStrategy::ALL {
            let gt = ground_truth_attention(&post, strategy);
            assert_eq!(gt.target.weights(), &[0.2; 5]);
            assert!(!gt.degenerate);
        }
        assert!(training_target(&post, AttentionStrategy::Normal, NormalAttention::Skip).is_none());
    }

    #[test]
    fn conservative_ground_truth() {
        let post = resolved(Label::Hatespeech, example_rationales(), 4);
        let gt = ground_truth_attention(&post, AttentionStrategy::Conservative);
        let oracle = naive_softmax(&[1.0, 0.0, 0.0, 0.0]);
        for ((g, o), r) in gt.target.weights().iter().zip(&oracle).zip([0.4754, 0.1749, 0.1749, 0.1749]) {
            assert_abs_diff_eq!(*g, *o, epsilon = 1e-14);
            assert_abs_diff_eq!(*g, r, epsilon = 5e-5);
        }
        assert!(!gt.degenerate);
    }

    #[test]
    fn empty_conservative_support_is_flagged_uniform() {
        let post = resolved(Label::Offensive, vec![bits(&[1, 0, 0]), bits(&[0, 1, 0])], 3);
        let gt = ground_truth_attention(&post, AttentionStrategy::Conservative);
        assert!(gt.degenerate);
        for w in gt.target.weights() {
            assert_abs_diff_eq!(*w, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert!(!ground_truth_attention(&post, AttentionStrategy::Lenient).degenerate);
    }

    #[test]
    fn softmax_is_stable_for_large_inputs() {
        let t = softmax_normalize(&[1000.0, 1000.0, -1000.0]);
        assert_abs_diff_eq!(t.weights()[0], 0.5, epsilon = 1e-12);
        assert!(t.weights().iter().all(|w| w.is_finite()));
    }
}
