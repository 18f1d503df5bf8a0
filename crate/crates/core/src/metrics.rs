//! SRCC, PLCC and dataset-size weighted aggregation.

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], gt: &[f64]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.len() < 2 {
        return Err(Error::InsufficientFrames {
            have: pred.len(),
            min: 2,
        });
    }
    if pred.iter().chain(gt).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    Ok(())
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson linear correlation.
pub fn plcc(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt)?;
    pearson(pred, gt)
}

/// 1-based fractional ranks; tied values share their average rank.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
pub fn srcc(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt)?;
    pearson(&fractional_ranks(pred), &fractional_ranks(gt))
}

/// `sum(value * n) / sum(n)` over per-dataset results.
pub fn weighted_overall(per_dataset: &[(f64, usize)]) -> Result<f64> {
    if per_dataset.is_empty() {
        return Err(Error::Empty);
    }
    if per_dataset.iter().any(|&(_, n)| n == 0) {
        return Err(Error::param(
            "n_videos",
            "every dataset needs at least one video",
        ));
    }
    let total = per_dataset.iter().map(|&(_, n)| n).sum::<usize>() as f64;
    Ok(per_dataset
        .iter()
        .map(|&(v, n)| v * (n as f64 / total))
        .sum())
}
