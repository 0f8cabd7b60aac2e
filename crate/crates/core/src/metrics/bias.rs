//! Unintended-bias ROC AUCs per target community.
//!
//! Every metric ranks posts by toxicity score (`1 - p(normal)`) with toxic
//! gold posts as positives; they differ only in which posts are ranked.
//!
//! * subgroup: posts mentioning the community
//! * BPSN: normal posts mentioning it, toxic posts not mentioning it
//! * BNSP: toxic posts mentioning it, normal posts not mentioning it

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::performance::auroc_binary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasSample {
    pub toxic: bool,
    pub score: f64,
    pub communities: BTreeSet<String>,
}

fn auroc_where(samples: &[BiasSample], keep: impl Fn(&BiasSample) -> bool) -> Option<f64> {
    let (scores, positives): (Vec<f64>, Vec<bool>) = samples
        .iter()
        .filter(|s| keep(s))
        .map(|s| (s.score, s.toxic))
        .unzip();
    auroc_binary(&scores, &positives)
}

pub fn subgroup_auc(samples: &[BiasSample], community: &str) -> Option<f64> {
    auroc_where(samples, |s| s.communities.contains(community))
}

pub fn bpsn_auc(samples: &[BiasSample], community: &str) -> Option<f64> {
    auroc_where(samples, |s| s.communities.contains(community) != s.toxic)
}

pub fn bnsp_auc(samples: &[BiasSample], community: &str) -> Option<f64> {
    auroc_where(samples, |s| s.communities.contains(community) == s.toxic)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityBias {
    /// Posts whose gold targets contain the community.
    pub posts: usize,
    pub subgroup_auc: Option<f64>,
    pub bpsn_auc: Option<f64>,
    pub bnsp_auc: Option<f64>,
}

pub const AGGREGATION: &str = "arithmetic_mean";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasMetrics {
    pub per_community: BTreeMap<String, CommunityBias>,
    /// How the community values below were combined; absent values are skipped.
    pub aggregation: String,
    pub subgroup_auc: Option<f64>,
    pub bpsn_auc: Option<f64>,
    pub bnsp_auc: Option<f64>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(sum, n), v| (sum + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Bias AUCs for every community mentioned in `samples`.
pub fn bias_metrics(samples: &[BiasSample]) -> BiasMetrics {
    let communities: BTreeSet<&str> = samples
        .iter()
        .flat_map(|s| s.communities.iter().map(String::as_str))
        .collect();
    let per_community: BTreeMap<String, CommunityBias> = communities
        .into_iter()
        .map(|c| {
            let entry = CommunityBias {
                posts: samples.iter().filter(|s| s.communities.contains(c)).count(),
                subgroup_auc: subgroup_auc(samples, c),
                bpsn_auc: bpsn_auc(samples, c),
                bnsp_auc: bnsp_auc(samples, c),
            };
            (c.to_string(), entry)
        })
        .collect();
    BiasMetrics {
        aggregation: AGGREGATION.to_string(),
        subgroup_auc: mean_defined(per_community.values().map(|b| b.subgroup_auc)),
        bpsn_auc: mean_defined(per_community.values().map(|b| b.bpsn_auc)),
        bnsp_auc: mean_defined(per_community.values().map(|b| b.bnsp_auc)),
        per_community,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn s(toxic: bool, score: f64, communities: &[&str]) -> BiasSample {
        BiasSample {
            toxic,
            score,
            communities: communities.iter().map(|c| c.to_string()).collect(),
        }
    }

    #[test]
    fn subgroup_examples() {
        let samples = [s(true, 0.9, &["J"]), s(false, 0.1, &["J"]), s(true, 0.2, &[]), s(false, 0.95, &[])];
        assert_eq!(subgroup_auc(&samples, "J"), Some(1.0));
        // 4-post slice: pairs (T.6,N.7) lose, (T.6,N.3) win, (T.8,N.7) win, (T.8,N.3) win
        let slice = [s(true, 0.6, &["J"]), s(true, 0.8, &["J"]), s(false, 0.7, &["J"]), s(false, 0.3, &["J"])];
        assert_abs_diff_eq!(subgroup_auc(&slice, "J").unwrap(), 0.75);
        assert_eq!(subgroup_auc(&[s(true, 0.5, &["J"]), s(true, 0.7, &["J"])], "J"), None);
    }

    #[test]
    fn bpsn_bnsp_examples() {
        let samples = [
            s(false, 0.1, &["J"]),
            s(false, 0.2, &["J"]),
            s(true, 0.5, &[]),
            s(true, 0.9, &["M"]),
            s(true, 0.3, &["J"]),
            s(false, 0.8, &[]),
        ];
        // BPSN: normal-J {0.1, 0.2} vs toxic-not-J {0.5, 0.9}
        assert_eq!(bpsn_auc(&samples, "J"), Some(1.0));
        // BNSP: toxic-J {0.3} vs normal-not-J {0.8}
        assert_eq!(bnsp_auc(&samples, "J"), Some(0.0));
        // no normal posts mention M
        assert_eq!(bpsn_auc(&samples, "M"), None);
        assert_eq!(bnsp_auc(&samples, "X"), None);
    }

    #[test]
    fn five_post_mixed_sets() {
        let samples = [
            s(false, 0.4, &["J"]),
            s(false, 0.6, &["J"]),
            s(true, 0.5, &[]),
            s(true, 0.7, &[]),
            s(true, 0.6, &[]),
        ];
        // pairs: (.5>.4) (.5<.6) (.7>.4) (.7>.6) (.6>.4) (.6=.6) → 4.5 / 6
        assert_abs_diff_eq!(bpsn_auc(&samples, "J").unwrap(), 0.75, epsilon = 1e-15);
        let samples = [
            s(true, 0.4, &["J"]),
            s(true, 0.9, &["J"]),
            s(false, 0.5, &[]),
            s(false, 0.1, &[]),
            s(false, 0.95, &[]),
        ];
        // pairs: .4 beats .1 only; .9 beats .5 and .1 → 3 / 6
        assert_abs_diff_eq!(bnsp_auc(&samples, "J").unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn means_skip_absent_values() {
        let samples = [
            s(true, 0.9, &["A"]),
            s(false, 0.1, &["A"]),
            s(true, 0.8, &["B"]),
            s(false, 0.2, &[]),
        ];
        let m = bias_metrics(&samples);
        assert_eq!(m.per_community["B"].subgroup_auc, None);
        assert_eq!(m.per_community["A"].posts, 2);
        assert_eq!(m.subgroup_auc, Some(1.0));
        assert_eq!(m.aggregation, AGGREGATION);
    }
}
