//! Brute-force oracles and random instance generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratsup::corpus::{AnnotatorRecord, Label, Post, ResolvedPost, Split};
use ratsup::metrics::{BiasSample, DiscreteRationale};
use ratsup::model::{ModelParams, Vocab};
use ratsup::rationale::softmax_normalize;
use ratsup::{batch_loss, AttentionTarget, TrainingExample};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scores with frequent ties: half the time drawn from a coarse grid.
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let coarse = rng.random::<bool>();
    (0..n)
        .map(|_| {
            if coarse {
                f64::from(rng.random_range(0..6u8)) / 5.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect()
}

pub fn random_bools(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<bool> {
    (0..n).map(|_| rng.random::<f64>() < p).collect()
}

/// Fraction of (positive, negative) pairs ordered correctly, ties as one half.
pub fn pairwise_auc(scores: &[f64], positives: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        if !positives[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positives[j] {
                continue;
            }
            pairs += 1;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

pub fn community_filter_auc(
    samples: &[BiasSample],
    positive: impl Fn(&BiasSample) -> bool,
    negative: impl Fn(&BiasSample) -> bool,
) -> Option<f64> {
    let pos: Vec<f64> = samples.iter().filter(|s| s.toxic && positive(s)).map(|s| s.score).collect();
    let neg: Vec<f64> = samples.iter().filter(|s| !s.toxic && negative(s)).map(|s| s.score).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

pub fn oracle_subgroup(samples: &[BiasSample], c: &str) -> Option<f64> {
    community_filter_auc(samples, |s| s.communities.contains(c), |s| s.communities.contains(c))
}

pub fn oracle_bpsn(samples: &[BiasSample], c: &str) -> Option<f64> {
    community_filter_auc(samples, |s| !s.communities.contains(c), |s| s.communities.contains(c))
}

pub fn oracle_bnsp(samples: &[BiasSample], c: &str) -> Option<f64> {
    community_filter_auc(samples, |s| s.communities.contains(c), |s| !s.communities.contains(c))
}

pub const COMMUNITY_NAMES: [&str; 3] = ["A", "B", "C"];

pub fn random_bias_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<BiasSample> {
    let scores = random_scores(rng, n);
    scores
        .into_iter()
        .map(|score| BiasSample {
            toxic: rng.random::<bool>(),
            score,
            communities: COMMUNITY_NAMES
                .iter()
                .filter(|_| rng.random::<f64>() < 0.4)
                .map(|c| c.to_string())
                .collect(),
        })
        .collect()
}

/// Area under the step-wise precision–recall curve by evaluating every
/// threshold `score >= t` over the distinct scores independently.
pub fn threshold_ap(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let predicted: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = predicted.iter().filter(|&&i| labels[i]).count() as f64;
        let precision = tp / predicted.len() as f64;
        let recall = tp / n_pos as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(area)
}

pub fn set_of(mask: &[bool]) -> BTreeSet<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

pub fn oracle_iou_f1(preds: &[BTreeSet<usize>], golds: &[BTreeSet<usize>]) -> f64 {
    let mut matches = 0.0;
    for (p, g) in preds.iter().zip(golds) {
        let inter = p.intersection(g).count() as f64;
        let union = p.union(g).count() as f64;
        if union > 0.0 && inter / union >= 0.5 {
            matches += 1.0;
        }
    }
    let with_pred = preds.iter().filter(|p| !p.is_empty()).count() as f64;
    let with_gold = golds.iter().filter(|g| !g.is_empty()).count() as f64;
    if matches == 0.0 {
        return 0.0;
    }
    let precision = matches / with_pred;
    let recall = matches / with_gold;
    2.0 * precision * recall / (precision + recall)
}

pub fn oracle_token_f1(preds: &[BTreeSet<usize>], golds: &[BTreeSet<usize>]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let total: f64 = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| {
            let tp = p.intersection(g).count() as f64;
            let fp = p.difference(g).count() as f64;
            let fn_ = g.difference(p).count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            }
        })
        .sum();
    total / preds.len() as f64
}

pub fn discrete(sets: &[BTreeSet<usize>]) -> Vec<DiscreteRationale> {
    sets.iter().map(|s| DiscreteRationale::new(s.iter().copied())).collect()
}

pub fn resolved(id: &str, tokens: &[&str], split: Split, annotators: Vec<AnnotatorRecord>) -> ResolvedPost {
    ResolvedPost::resolve(Post {
        id: id.to_string(),
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        split,
        annotators,
    })
    .expect("majority label")
}

/// Small random model: `real_tokens` named t0, t1, … plus the two reserved rows.
pub fn random_model(rng: &mut ChaCha8Rng, real_tokens: usize, dim: usize, scale: f64) -> ModelParams {
    let names: Vec<String> = (0..real_tokens).map(|i| format!("t{i}")).collect();
    let vocab = Vocab::build(names.iter().map(String::as_str), "[UNK]");
    let mut params = ModelParams::zeros(vocab, dim);
    for p in params.parameters_mut() {
        *p = (rng.random::<f64>() * 2.0 - 1.0) * scale;
    }
    params
}

pub fn random_batch(rng: &mut ChaCha8Rng, params: &ModelParams, size: usize) -> Vec<TrainingExample> {
    let vocab = params.vocab.tokens().to_vec();
    (0..size)
        .map(|_| {
            let len = rng.random_range(1..=6);
            let tokens: Vec<String> = (0..len)
                .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
                .collect();
            let label = Label::from_index(rng.random_range(0..3)).expect("label index");
            let target = (rng.random::<f64>() < 0.8).then(|| {
                let raw: Vec<f64> = (0..len).map(|_| f64::from(rng.random_range(0..4u8)) / 3.0).collect();
                softmax_normalize(&raw)
            });
            TrainingExample { tokens, label, target }
        })
        .collect()
}

/// Central differences of the mean batch loss for every parameter, in
/// [`ModelParams::parameters`] order.
pub fn finite_difference(params: &ModelParams, batch: &[TrainingExample], lambda: f64, h: f64) -> Vec<f64> {
    let n = params.num_parameters();
    (0..n)
        .map(|i| {
            let mut plus = params.clone();
            *plus.parameters_mut().nth(i).expect("index") += h;
            let mut minus = params.clone();
            *minus.parameters_mut().nth(i).expect("index") -= h;
            (batch_loss(&plus, batch, lambda).l_total - batch_loss(&minus, batch, lambda).l_total) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Token-level scan for lexicon hits, independent of the masking code.
pub fn scan_hits(tokens: &[String], terms: &BTreeSet<String>, mask_token: &str) -> usize {
    tokens
        .iter()
        .filter(|t| t.as_str() != mask_token && terms.contains(&t.to_lowercase()))
        .count()
}

pub fn uniform_target(len: usize) -> AttentionTarget {
    AttentionTarget::uniform(len)
}
