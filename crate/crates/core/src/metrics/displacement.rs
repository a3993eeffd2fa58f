//! Rank-displacement metrics for a fixed predicate `p`.
//!
//! With `T_k` the annotated relations on which `p` ranks in the top `k` and
//! `P` the positively annotated ones, both metrics average a ratio over
//! `k = 1..n-1`:
//!
//! * dominance overestimation: `1 - mean_k |T_k ∩ P| / |T_k|` (a precision
//!   view; an empty `T_k` contributes 1),
//! * discrimination disadvantage: `1 - mean_k |T_k ∩ P| / |P|` (a recall
//!   view).

use super::eval_set::PredicateEvalSet;
use super::MetricError;

/// Per-rank histograms of all entries and of positive entries.
fn rank_histograms(eval_set: &PredicateEvalSet, n: usize) -> Result<(Vec<usize>, Vec<usize>), MetricError> {
    if n < 2 {
        return Err(MetricError::TooFewPredicates(n));
    }
    let mut all = vec![0usize; n];
    let mut pos = vec![0usize; n];
    for e in eval_set.entries() {
        if e.rank >= n {
            return Err(MetricError::RankOutOfRange { rank: e.rank, n });
        }
        all[e.rank] += 1;
        if e.is_positive() {
            pos[e.rank] += 1;
        }
    }
    Ok((all, pos))
}

/// Dominance overestimation: how much `p` crowds out other predicates on
/// relations where it does not apply. 0 is ideal.
pub fn pdo(eval_set: &PredicateEvalSet, n: usize) -> Result<f64, MetricError> {
    if eval_set.is_empty() {
        return Err(MetricError::InsufficientSupport { positives: 0, negatives: 0 });
    }
    let (all, pos) = rank_histograms(eval_set, n)?;
    let (mut in_top, mut pos_in_top) = (0usize, 0usize);
    let mut sum = 0.0;
    for k in 1..n {
        in_top += all[k - 1];
        pos_in_top += pos[k - 1];
        sum += if in_top == 0 { 1.0 } else { pos_in_top as f64 / in_top as f64 };
    }
    Ok(1.0 - sum / (n - 1) as f64)
}

/// Discrimination disadvantage: how far `p` is pushed down the ranking on
/// relations where it does apply. 0 is ideal.
pub fn pdd(eval_set: &PredicateEvalSet, n: usize) -> Result<f64, MetricError> {
    let positives = eval_set.num_positives();
    if positives == 0 {
        return Err(MetricError::InsufficientSupport { positives: 0, negatives: eval_set.len() });
    }
    let (_, pos) = rank_histograms(eval_set, n)?;
    let mut pos_in_top = 0usize;
    let mut sum = 0.0;
    for k in 1..n {
        pos_in_top += pos[k - 1];
        sum += pos_in_top as f64 / positives as f64;
    }
    Ok(1.0 - sum / (n - 1) as f64)
}
