use super::maps::{LabelMap, ProbabilityMap, UNLABELED};
use crate::error::{Error, Result};

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counting one half.
///
/// Computed from average ranks (Mann–Whitney U) in `O(n log n)`.
pub fn auc_score(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::InvalidInput("scores and labels differ in length".into()));
    }
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("AUC needs both positive and negative samples".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied block shares the mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| positive[k]).count();
        rank_sum_pos += mean_rank * tied_pos as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// One-vs-rest AUC per class over labeled pixels, plus their mean.
///
/// Classes absent from the ground truth (or covering every labeled pixel) get `None`
/// and are left out of the mean.
pub fn macro_auc(probs: &ProbabilityMap, truth: &LabelMap) -> Result<(Vec<Option<f64>>, f64)> {
    if probs.pixel_count() != truth.len() {
        return Err(Error::GeometryMismatch(
            "probabilities and labels differ in size".into(),
        ));
    }
    let labeled: Vec<usize> = (0..truth.len()).filter(|&i| truth.labels()[i] != UNLABELED).collect();
    let mut per_class = Vec::with_capacity(probs.classes());
    for c in 0..probs.classes() {
        let scores: Vec<f64> = labeled.iter().map(|&i| probs.row(i)[c] as f64).collect();
        let positive: Vec<bool> = labeled.iter().map(|&i| truth.labels()[i] as usize == c).collect();
        per_class.push(auc_score(&scores, &positive).ok());
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Degenerate("no class has both positives and negatives".into()));
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    Ok((per_class, mean))
}

/// Fraction of labeled pixels whose predicted label matches.
pub fn accuracy(predicted: &LabelMap, truth: &LabelMap) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (&p, &t) in predicted.labels().iter().zip(truth.labels()) {
        if t != UNLABELED {
            total += 1;
            hit += usize::from(p == t);
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}
