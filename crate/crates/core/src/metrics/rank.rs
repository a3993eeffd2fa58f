use std::cmp::Ordering;

use super::MetricError;

/// Rank of every predicate within one prediction row: `rank_of(p) == 0` is
/// the most confident predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector {
    ranks: Vec<usize>,
}

impl RankVector {
    pub fn rank_of(&self, predicate_id: usize) -> usize {
        self.ranks[predicate_id]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Predicate ids from most to least confident.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (p, &r) in self.ranks.iter().enumerate() {
            order[r] = p;
        }
        order
    }
}

/// Sorts predicates by descending score; equal scores keep ascending id order.
pub fn rank_predicates(scores: &[f64]) -> Result<RankVector, MetricError> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore);
    }
    Ok(rank_ordered(scores))
}

/// Like [`rank_predicates`] but also accepts infinite scores (never NaN).
pub(crate) fn rank_ordered(scores: &[f64]) -> RankVector {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| descending(scores[a], scores[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (r, &p) in order.iter().enumerate() {
        ranks[p] = r;
    }
    RankVector { ranks }
}

pub(crate) fn descending(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).expect("scores are never NaN")
}
