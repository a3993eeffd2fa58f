//! Ranking score of a candidate relation for a fixed predicate.
//!
//! Proposals are ranked by the ratio of the predicate's softmax probability
//! to the "no relation" probability, with the softmax taken over all `n`
//! predicates plus "no relation". The normaliser cancels in the ratio, so
//! the score is `exp(logit_p - logit_no_relation)` and is computed from the
//! logit difference directly.

use serde::{Deserialize, Serialize};

use super::ProposalError;

/// How the model's scores are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    #[default]
    Logits,
    /// Already softmax-normalised; converted to log space first.
    Probabilities,
}

/// Natural log of the ranking ratio. Sorting by this is the same as sorting
/// by [`proposal_score`] and never overflows.
pub fn log_proposal_score(
    scores: &[f64],
    no_relation_score: f64,
    predicate: usize,
    kind: ScoreKind,
) -> Result<f64, ProposalError> {
    let &score = scores
        .get(predicate)
        .ok_or_else(|| ProposalError::InvalidConfig(format!("predicate {predicate} out of range")))?;
    match kind {
        ScoreKind::Logits => {
            if !score.is_finite() || !no_relation_score.is_finite() {
                return Err(ProposalError::NonFiniteScore);
            }
            Ok(score - no_relation_score)
        }
        ScoreKind::Probabilities => {
            if !(0.0..=1.0).contains(&score) || !(no_relation_score > 0.0 && no_relation_score <= 1.0) {
                return Err(ProposalError::NonFiniteScore);
            }
            Ok(score.ln() - no_relation_score.ln())
        }
    }
}

/// `softmax_p / softmax_no_relation` for raw logits.
pub fn proposal_score(scores: &[f64], no_relation_score: f64, predicate: usize) -> Result<f64, ProposalError> {
    log_proposal_score(scores, no_relation_score, predicate, ScoreKind::Logits).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn softmax_ratio(logits: &[f64], norel: f64, p: usize) -> f64 {
        let max = logits.iter().copied().fold(norel, f64::max);
        let z: f64 = logits.iter().map(|l| (l - max).exp()).sum::<f64>() + (norel - max).exp();
        ((logits[p] - max).exp() / z) / ((norel - max).exp() / z)
    }

    #[test]
    fn equal_logits_give_one() {
        assert_eq!(proposal_score(&[0.3, 1.7], 1.7, 1).unwrap(), 1.0);
    }

    #[test]
    fn ln2_above_gives_two() {
        let s = proposal_score(&[0.5 + std::f64::consts::LN_2], 0.5, 0).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_explicit_softmax_ratio() {
        let logits = [1.2, -0.4, 3.3, 0.0];
        for p in 0..4 {
            let a = proposal_score(&logits, 0.9, p).unwrap();
            let b = softmax_ratio(&logits, 0.9, p);
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn large_logits_do_not_overflow_in_log_space() {
        let l = log_proposal_score(&[1000.0], -1000.0, 0, ScoreKind::Logits).unwrap();
        assert_eq!(l, 2000.0);
    }

    #[test]
    fn probabilities_use_plain_ratio() {
        let l = log_proposal_score(&[0.2, 0.3], 0.5, 1, ScoreKind::Probabilities).unwrap();
        assert!((l.exp() - 0.6).abs() < 1e-12);
        assert!(log_proposal_score(&[0.2], 0.0, 0, ScoreKind::Probabilities).is_err());
    }

    #[test]
    fn rejects_non_finite_and_bad_index() {
        assert!(matches!(proposal_score(&[f64::NAN], 0.0, 0), Err(ProposalError::NonFiniteScore)));
        assert!(matches!(proposal_score(&[0.0], f64::INFINITY, 0), Err(ProposalError::NonFiniteScore)));
        assert!(proposal_score(&[0.0], 0.0, 1).is_err());
    }
}
