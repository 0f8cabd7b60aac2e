//! Classification metrics: accuracy, macro F1, ROC AUC.

use crate::corpus::Label;
use crate::error::{Error, Result};

fn check_lengths(preds: usize, golds: usize) -> Result<()> {
    if preds != golds {
        return Err(Error::LengthMismatch {
            left: preds,
            right: golds,
        });
    }
    if preds == 0 {
        return Err(Error::Empty("label sequence"));
    }
    Ok(())
}

/// `matrix[gold][pred]` counts.
pub fn confusion_matrix(preds: &[Label], golds: &[Label]) -> Result<[[usize; 3]; 3]> {
    check_lengths(preds.len(), golds.len())?;
    let mut matrix = [[0usize; 3]; 3];
    for (p, g) in preds.iter().zip(golds) {
        matrix[g.index()][p.index()] += 1;
    }
    Ok(matrix)
}

pub fn accuracy(preds: &[Label], golds: &[Label]) -> Result<f64> {
    check_lengths(preds.len(), golds.len())?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Unweighted mean of per-class F1 over all three labels. A class with
/// precision + recall = 0 (including one absent everywhere) scores 0.
pub fn macro_f1(preds: &[Label], golds: &[Label]) -> Result<f64> {
    let m = confusion_matrix(preds, golds)?;
    let mut total = 0.0;
    for (k, row) in m.iter().enumerate() {
        let tp = row[k] as f64;
        let predicted: usize = m.iter().map(|r| r[k]).sum();
        let actual: usize = row.iter().sum();
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
        if precision + recall > 0.0 {
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(total / Label::COUNT as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `None` unless both classes are present.
///
/// Computed from the Mann–Whitney rank sum with mid-ranks for ties.
pub fn auroc_binary(scores: &[f64], positives: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positives.len(), "scores and labels differ in length");
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // 2 × rank sum keeps mid-ranks integral
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share the mid-rank (start + 1 + end) / 2
        let twice_mid = (start + 1 + end) as u64;
        let pos_in_group = order[start..end].iter().filter(|&&i| positives[i]).count() as u64;
        twice_rank_sum += twice_mid * pos_in_group;
        start = end;
    }
    let n_pos_u = n_pos as u64;
    let twice_u = twice_rank_sum - n_pos_u * (n_pos_u + 1);
    Some(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// One-vs-rest ROC AUC per label present in `golds`, macro-averaged.
pub fn auroc_multiclass(probs: &[[f64; 3]], golds: &[Label]) -> Result<f64> {
    check_lengths(probs.len(), golds.len())?;
    let present: Vec<Label> = Label::ALL
        .into_iter()
        .filter(|l| golds.contains(l))
        .collect();
    if present.len() < 2 {
        return Err(Error::Undefined("multiclass AUROC needs at least two gold classes"));
    }
    let mut total = 0.0;
    for &label in &present {
        let scores: Vec<f64> = probs.iter().map(|p| p[label.index()]).collect();
        let positives: Vec<bool> = golds.iter().map(|&g| g == label).collect();
        total += auroc_binary(&scores, &positives).expect("both classes present");
    }
    Ok(total / present.len() as f64)
}
