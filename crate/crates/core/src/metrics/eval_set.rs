use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalLabel {
    Positive,
    Negative,
}

/// One annotated relation as seen by a fixed predicate `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalEntry {
    pub label: EvalLabel,
    /// The model's score for `p` on this relation.
    pub confidence: f64,
    /// Rank of `p` among all predicates of this relation.
    pub rank: usize,
}

impl EvalEntry {
    pub fn positive(confidence: f64, rank: usize) -> Self {
        Self { label: EvalLabel::Positive, confidence, rank }
    }

    pub fn negative(confidence: f64, rank: usize) -> Self {
        Self { label: EvalLabel::Negative, confidence, rank }
    }

    pub fn is_positive(&self) -> bool {
        self.label == EvalLabel::Positive
    }
}

/// All relations annotated (either way) for one predicate, pooled over the
/// whole dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredicateEvalSet {
    entries: Vec<EvalEntry>,
}

impl PredicateEvalSet {
    /// Confidences may be `-inf` (substituted for missing predictions) but
    /// never NaN.
    pub fn new(entries: Vec<EvalEntry>) -> Result<Self, MetricError> {
        if entries.iter().any(|e| e.confidence.is_nan()) {
            return Err(MetricError::NonFiniteScore);
        }
        Ok(Self { entries })
    }

    pub fn push(&mut self, entry: EvalEntry) -> Result<(), MetricError> {
        if entry.confidence.is_nan() {
            return Err(MetricError::NonFiniteScore);
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[EvalEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_positives(&self) -> usize {
        self.entries.iter().filter(|e| e.is_positive()).count()
    }

    pub fn num_negatives(&self) -> usize {
        self.entries.len() - self.num_positives()
    }
}
