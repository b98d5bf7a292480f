use crate::error::{Error, Result};

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("AUC needs both positive and negative examples".into()));
    }
    Ok((pos, neg))
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties counting ½.
///
/// Computed from mid-ranks in integer arithmetic, so the result is the exact
/// pair count divided by `2 · n⁺ · n⁻`.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the pairs won by positives plus the tied pairs.
    let mut doubled: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let group = &order[start..end];
        let p = group.iter().filter(|&&i| labels[i]).count() as u128;
        let n = group.len() as u128 - p;
        doubled += p * (2 * negatives_below + n);
        negatives_below += n;
        start = end;
    }
    Ok(doubled as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Area under the precision–recall curve, linear between the operating points of
/// successive distinct thresholds, starting from `(recall 0, precision 1)`.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, _) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_r, mut prev_p) = (0.0, 1.0);
    let mut area = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            if labels[order[end]] {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        let r = tp as f64 / pos as f64;
        let p = tp as f64 / (tp + fp) as f64;
        area += (r - prev_r) * (p + prev_p) / 2.0;
        (prev_r, prev_p) = (r, p);
        start = end;
    }
    Ok(area)
}

/// Mean of `1 / rank`.
pub fn mrr(ranks: &[f64]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Degenerate("MRR of no ranks".into()));
    }
    if let Some(r) = ranks.iter().find(|&&r| !(r >= 1.0)) {
        return Err(Error::Precondition(format!("rank {r} is below 1")));
    }
    Ok(ranks.iter().map(|r| 1.0 / r).sum::<f64>() / ranks.len() as f64)
}
