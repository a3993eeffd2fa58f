use super::eval_set::PredicateEvalSet;
use super::MetricError;

/// ROC-AUC of one predicate's confidences against its positive/negative
/// annotations.
///
/// Computed as the Mann-Whitney U statistic over midranks, so ties between a
/// positive and a negative count one half. Only the ordering of confidences
/// enters the computation, which makes the result identical under any
/// strictly increasing transform of the scores.
pub fn predicate_auc(eval_set: &PredicateEvalSet) -> Result<f64, MetricError> {
    let entries = eval_set.entries();
    let n_pos = eval_set.num_positives();
    let n_neg = entries.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::InsufficientSupport { positives: n_pos, negatives: n_neg });
    }

    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        entries[a].confidence.partial_cmp(&entries[b].confidence).expect("confidences are never NaN")
    });

    // Sum of 1-based midranks of the positives.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let c = entries[order[start]].confidence;
        let mut end = start + 1;
        while end < order.len() && entries[order[end]].confidence == c {
            end += 1;
        }
        let midrank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| entries[i].is_positive()).count();
        rank_sum += midrank * pos_in_group as f64;
        start = end;
    }

    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
