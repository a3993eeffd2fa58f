//! Recall@k and mean Recall@k in the predicate-classification setting:
//! objects are given, so a prediction matches a ground-truth triplet exactly
//! on (subject, object, predicate).

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::predictions::{PredictionMatrix, PredictionSet};
use super::rank::descending;
use super::MetricError;
use crate::dataset::Dataset;

/// Positive `(subject, object, predicate)` triplets per image.
pub type GroundTruth = BTreeMap<String, Vec<(usize, usize, usize)>>;

/// Positive triplets of a dataset, skipping anything that touches a faulty
/// object.
pub fn ground_truth(d: &Dataset) -> GroundTruth {
    let mut gt = GroundTruth::new();
    for img in &d.images {
        let list: Vec<_> =
            d.positives_of(&img.image_id).filter(|&(s, o, _)| !img.is_faulty(s) && !img.is_faulty(o)).collect();
        if !list.is_empty() {
            gt.insert(img.image_id.clone(), list);
        }
    }
    gt
}

/// The `k` highest-scoring (subject, object, predicate) predictions of an
/// image. With a graph constraint only each pair's top predicate competes.
fn top_k(m: &PredictionMatrix, k: usize, graph_constraint: bool) -> HashSet<(usize, usize, usize)> {
    if k == 0 {
        return HashSet::new();
    }
    // (score, row, predicate); ties fall back to row then predicate order.
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (i, row) in m.rows().iter().enumerate() {
        if graph_constraint {
            let best = (0..row.scores.len()).min_by(|&a, &b| descending(row.scores[a], row.scores[b]).then(a.cmp(&b)));
            if let Some(p) = best {
                cands.push((row.scores[p], i, p));
            }
        } else {
            cands.extend(row.scores.iter().enumerate().map(|(p, &s)| (s, i, p)));
        }
    }
    cands.sort_by(|a, b| descending(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    cands
        .into_iter()
        .take(k)
        .map(|(_, i, p)| {
            let row = &m.rows()[i];
            (row.subject_idx, row.object_idx, p)
        })
        .collect()
}

/// (subject, object, predicate)
type Triplet = (usize, usize, usize);

fn hits_per_image<'a>(
    preds: &'a PredictionSet,
    gt: &'a GroundTruth,
    k: usize,
    graph_constraint: bool,
) -> impl Iterator<Item = (&'a [Triplet], HashSet<Triplet>)> + 'a {
    gt.iter().filter(|(_, t)| !t.is_empty()).map(move |(image_id, triplets)| {
        let top = preds.get(image_id).map(|m| top_k(m, k, graph_constraint)).unwrap_or_default();
        (triplets.as_slice(), top)
    })
}

/// Fraction of ground-truth triplets covered by the top `k` predictions,
/// averaged over images with at least one triplet. Images without a
/// prediction matrix score zero.
pub fn recall_at_k(
    preds: &PredictionSet,
    gt: &GroundTruth,
    k: usize,
    graph_constraint: bool,
) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    let mut images = 0usize;
    for (triplets, top) in hits_per_image(preds, gt, k, graph_constraint) {
        let hits = triplets.iter().filter(|t| top.contains(t)).count();
        sum += hits as f64 / triplets.len() as f64;
        images += 1;
    }
    if images == 0 {
        return Err(MetricError::EmptyGroundTruth);
    }
    Ok(sum / images as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRecall {
    /// Unweighted mean over predicates that have ground truth.
    pub mean: f64,
    /// Recall of each predicate id; `None` without ground truth.
    pub per_predicate: Vec<Option<f64>>,
}

/// Per-predicate Recall@k (each image-averaged over the images containing
/// that predicate), then the plain mean over predicates.
pub fn mean_recall_at_k(
    preds: &PredictionSet,
    gt: &GroundTruth,
    num_predicates: usize,
    k: usize,
    graph_constraint: bool,
) -> Result<MeanRecall, MetricError> {
    let mut sums = vec![0.0; num_predicates];
    let mut counts = vec![0usize; num_predicates];
    for (triplets, top) in hits_per_image(preds, gt, k, graph_constraint) {
        let mut total = BTreeMap::<usize, (usize, usize)>::new();
        for t in triplets {
            if t.2 >= num_predicates {
                return Err(MetricError::ShapeMismatch(format!(
                    "ground-truth predicate {} but only {num_predicates} predicates",
                    t.2
                )));
            }
            let e = total.entry(t.2).or_default();
            e.0 += 1;
            if top.contains(t) {
                e.1 += 1;
            }
        }
        for (p, (n, hits)) in total {
            sums[p] += hits as f64 / n as f64;
            counts[p] += 1;
        }
    }
    let per_predicate: Vec<Option<f64>> =
        sums.iter().zip(&counts).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect();
    let defined: Vec<f64> = per_predicate.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(MetricError::EmptyGroundTruth);
    }
    Ok(MeanRecall { mean: defined.iter().sum::<f64>() / defined.len() as f64, per_predicate })
}
