use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::predicate_auc;
use super::displacement::{pdd, pdo};
use super::eval_set::{EvalEntry, PredicateEvalSet};
use super::predictions::{PredictionMatrix, PredictionSet};
use super::rank::{rank_ordered, RankVector};
use super::recall::{ground_truth, mean_recall_at_k, recall_at_k};
use super::MetricError;
use crate::dataset::{build_label_matrix, Dataset, Label};

/// What to do when an annotated pair has no prediction row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingRowPolicy {
    #[default]
    Strict,
    /// Score every predicate of the missing row as `-inf`.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOptions {
    pub ks: Vec<usize>,
    pub graph_constraint: bool,
    pub missing_rows: MissingRowPolicy,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self { ks: vec![20, 50, 100], graph_constraint: true, missing_rows: MissingRowPolicy::Strict }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateRow {
    pub predicate_id: usize,
    pub predicate: String,
    pub p_auc: f64,
    pub pdd: f64,
    pub pdo: f64,
    /// One value per entry of [`MetricReport::ks`].
    pub recall_at_k: Vec<f64>,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCount {
    pub predicate_id: usize,
    pub predicate: String,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub p_auc: f64,
    pub pdd: f64,
    pub pdo: f64,
    pub recall_at_k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallSummary {
    pub k: usize,
    pub recall: Option<f64>,
    pub mean_recall: Option<f64>,
}

/// Per-predicate metrics with a mean row.
///
/// `rows` holds every predicate with at least one positive and one negative
/// annotation, in predicate id order. All others are listed in `excluded`
/// with their support counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ks: Vec<usize>,
    pub graph_constraint: bool,
    pub rows: Vec<PredicateRow>,
    pub excluded: Vec<SupportCount>,
    /// `None` when no predicate qualifies for a row.
    pub mean_row: Option<MeanRow>,
    /// Dataset-level Recall@k and mean Recall@k.
    pub summary: Vec<RecallSummary>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// Column means over `rows`.
pub fn mean_row(rows: &[PredicateRow]) -> Option<MeanRow> {
    if rows.is_empty() {
        return None;
    }
    let width = rows[0].recall_at_k.len();
    Some(MeanRow {
        p_auc: mean(rows.iter().map(|r| r.p_auc)),
        pdd: mean(rows.iter().map(|r| r.pdd)),
        pdo: mean(rows.iter().map(|r| r.pdo)),
        recall_at_k: (0..width).map(|i| mean(rows.iter().map(|r| r.recall_at_k[i]))).collect(),
    })
}

/// Collects one eval set per predicate from every annotated pair of the
/// dataset.
pub fn collect_eval_sets(
    dataset: &Dataset,
    preds: &PredictionSet,
    policy: MissingRowPolicy,
) -> Result<Vec<PredicateEvalSet>, MetricError> {
    let n = dataset.categories.num_predicates();
    let mut sets = vec![PredicateEvalSet::default(); n];
    for image_id in dataset.relations.keys() {
        let labels = build_label_matrix(dataset, image_id).map_err(|e| MetricError::Dataset(e.to_string()))?;
        let matrix = preds.get(image_id);
        for (&(s, o), lv) in &labels {
            let (scores, ranks): (Vec<f64>, RankVector) = match matrix.and_then(|m| m.row(s, o)) {
                Some(row) => (row.scores.clone(), rank_ordered(&row.scores)),
                None => match policy {
                    MissingRowPolicy::Strict => {
                        return Err(MetricError::MissingPrediction {
                            image_id: image_id.clone(),
                            subject_idx: s,
                            object_idx: o,
                        })
                    }
                    MissingRowPolicy::Lenient => {
                        let scores = vec![f64::NEG_INFINITY; n];
                        let ranks = rank_ordered(&scores);
                        (scores, ranks)
                    }
                },
            };
            for (p, &label) in lv.labels().iter().enumerate() {
                let entry = match label {
                    Label::Unannotated => continue,
                    Label::Positive => EvalEntry::positive(scores[p], ranks.rank_of(p)),
                    Label::Negative => EvalEntry::negative(scores[p], ranks.rank_of(p)),
                };
                sets[p].push(entry)?;
            }
        }
    }
    Ok(sets)
}

fn check_predictions(dataset: &Dataset, preds: &PredictionSet) -> Result<(), MetricError> {
    let n = dataset.categories.num_predicates();
    for (image_id, m) in preds {
        if m.num_predicates() != n {
            return Err(MetricError::ShapeMismatch(format!(
                "image {image_id}: {} predicate scores, dataset has {n} predicates",
                m.num_predicates()
            )));
        }
        if let Some(img) = dataset.image(image_id) {
            let objects = img.objects.len();
            if let Some(row) = m.rows().iter().find(|r| r.subject_idx >= objects || r.object_idx >= objects) {
                return Err(MetricError::InvalidPrediction(format!(
                    "image {image_id}: row ({}, {}) but the image has {objects} objects",
                    row.subject_idx, row.object_idx
                )));
            }
        }
    }
    Ok(())
}

/// Evaluates a model's predictions against a dataset with positive and
/// negative annotations.
pub fn evaluate(
    dataset: &Dataset,
    preds: &PredictionSet,
    options: &EvaluateOptions,
) -> Result<MetricReport, MetricError> {
    check_predictions(dataset, preds)?;
    let n = dataset.categories.num_predicates();
    let sets = collect_eval_sets(dataset, preds, options.missing_rows)?;

    // Rows touching faulty objects do not take part in the recall ranking.
    let filtered: PredictionSet = preds
        .iter()
        .filter_map(|(id, m)| {
            let img = dataset.image(id)?;
            let m: PredictionMatrix = m.without_rows(|r| img.is_faulty(r.subject_idx) || img.is_faulty(r.object_idx));
            Some((id.clone(), m))
        })
        .collect();
    let gt = ground_truth(dataset);
    let mut per_k_recall: Vec<Vec<Option<f64>>> = Vec::with_capacity(options.ks.len());
    let mut summary = Vec::with_capacity(options.ks.len());
    for &k in &options.ks {
        let r = recall_at_k(&filtered, &gt, k, options.graph_constraint);
        let mr = mean_recall_at_k(&filtered, &gt, n, k, options.graph_constraint);
        let (r, mr) = match (r, mr) {
            (Ok(r), Ok(mr)) => (Some(r), Some(mr)),
            (Err(MetricError::EmptyGroundTruth), _) | (_, Err(MetricError::EmptyGroundTruth)) => (None, None),
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        per_k_recall.push(mr.as_ref().map_or_else(|| vec![None; n], |m| m.per_predicate.clone()));
        summary.push(RecallSummary { k, recall: r, mean_recall: mr.map(|m| m.mean) });
    }

    let results: Vec<Result<Result<PredicateRow, SupportCount>, MetricError>> = sets
        .par_iter()
        .enumerate()
        .map(|(p, set)| {
            let name = dataset.categories.predicate_classes[p].clone();
            let (positives, negatives) = (set.num_positives(), set.num_negatives());
            if positives == 0 || negatives == 0 {
                return Ok(Err(SupportCount { predicate_id: p, predicate: name, positives, negatives }));
            }
            Ok(Ok(PredicateRow {
                predicate_id: p,
                predicate: name,
                p_auc: predicate_auc(set)?,
                pdd: pdd(set, n)?,
                pdo: pdo(set, n)?,
                recall_at_k: per_k_recall.iter().map(|v| v[p].unwrap_or(0.0)).collect(),
                positives,
                negatives,
            }))
        })
        .collect();

    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        match r? {
            Ok(row) => rows.push(row),
            Err(support) => excluded.push(support),
        }
    }
    Ok(MetricReport {
        ks: options.ks.clone(),
        graph_constraint: options.graph_constraint,
        mean_row: mean_row(&rows),
        rows,
        excluded,
        summary,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MetricError> {
        serde_json::from_str(text).map_err(|e| MetricError::Format(format!("report: {e}")))
    }

    /// Plain-text table: one line per predicate, then the mean row.
    pub fn to_table(&self) -> String {
        let name_width = self.rows.iter().map(|r| r.predicate.len()).chain(["Predicate".len()]).max().unwrap_or(9);
        let mut header = format!("{:<name_width$}  {:>6}  {:>6}  {:>6}", "Predicate", "P-AUC", "PDD", "PDO");
        for k in &self.ks {
            let _ = write!(header, "  {:>6}", format!("R@{k}"));
        }
        let _ = write!(header, "  {:>6}  {:>6}", "#pos", "#neg");
        let rule = "-".repeat(header.len());

        let mut out = String::new();
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{rule}");
        for r in &self.rows {
            let _ = write!(out, "{:<name_width$}  {:>6.2}  {:>6.2}  {:>6.2}", r.predicate, r.p_auc, r.pdd, r.pdo);
            for v in &r.recall_at_k {
                let _ = write!(out, "  {v:>6.2}");
            }
            let _ = writeln!(out, "  {:>6}  {:>6}", r.positives, r.negatives);
        }
        let _ = writeln!(out, "{rule}");
        match &self.mean_row {
            Some(m) => {
                let _ = write!(out, "{:<name_width$}  {:>6.2}  {:>6.2}  {:>6.2}", "mean", m.p_auc, m.pdd, m.pdo);
                for v in &m.recall_at_k {
                    let _ = write!(out, "  {v:>6.2}");
                }
                let _ = writeln!(out);
            }
            None => {
                let _ = writeln!(out, "mean  (no predicate has both positive and negative annotations)");
            }
        }

        let skipped: Vec<_> = self.excluded.iter().filter(|s| s.positives + s.negatives > 0).collect();
        if !skipped.is_empty() {
            let _ = writeln!(out, "\nexcluded (needs positives and negatives):");
            for s in skipped {
                let _ = writeln!(out, "  {}: {} pos, {} neg", s.predicate, s.positives, s.negatives);
            }
        }
        let _ = writeln!(out, "\ngraph constraint: {}", if self.graph_constraint { "yes" } else { "no" });
        for s in &self.summary {
            let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(out, "R@{}: {}  mR@{}: {}", s.k, fmt(s.recall), s.k, fmt(s.mean_recall));
        }
        out
    }
}
