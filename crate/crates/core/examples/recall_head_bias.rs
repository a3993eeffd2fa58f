//! Why Recall@k hides rare predicates.
//!
//! Three head predicates carry 52% of all ground-truth labels. An oracle that
//! only ever predicts those three reaches Recall = 0.52 while its mean Recall
//! exposes that every other class is missed.
//!
//! ```text
//! cargo run --example recall_head_bias
//! ```

use haystack::dataset::{CategoryTable, Dataset, ImageRecord, RelationTriplet, SegmentedObject};
use haystack::metrics::{
    ground_truth, mean_recall_at_k, recall_at_k, MeanRecall, PredictionMatrix, PredictionRow, PredictionSet,
};

const PREDICATES: usize = 20;
const HEADS: usize = 3;
const IMAGES: usize = 100;
/// Ground-truth triplets per image, of which `HEAD_PER_IMAGE` use a head class.
const PER_IMAGE: usize = 25;
const HEAD_PER_IMAGE: usize = 13;

/// Each image is a chain of objects; pair `(i, i + 1)` carries exactly one
/// positive triplet.
fn head_heavy_dataset() -> Dataset {
    let predicates = (0..PREDICATES).map(|p| format!("pred{p}")).collect();
    let mut d = Dataset::new(CategoryTable::new(vec!["thing".into()], vec![], predicates));
    let mut tail = 0;
    for img in 0..IMAGES {
        let id = format!("img{img:03}");
        let objects = (0..=PER_IMAGE as u64).map(|s| SegmentedObject::new(s + 1, 0)).collect();
        d.images.push(ImageRecord::new(&id, format!("{id}.jpg"), 100, 100).with_objects(objects));
        for i in 0..PER_IMAGE {
            let p = if i < HEAD_PER_IMAGE {
                i % HEADS
            } else {
                tail += 1;
                HEADS + tail % (PREDICATES - HEADS)
            };
            d.push_relation(&id, RelationTriplet::positive(i, i + 1, p));
        }
    }
    d
}

/// Puts all mass on the true predicate when it is a head class, and on some
/// head class otherwise.
fn head_only_oracle(d: &Dataset) -> PredictionSet {
    let mut preds = PredictionSet::new();
    for (id, list) in &d.relations {
        let rows = list
            .iter()
            .map(|t| {
                let mut scores = vec![0.0; PREDICATES];
                let guess = if t.predicate_id < HEADS { t.predicate_id } else { t.subject_idx % HEADS };
                scores[guess] = 1.0;
                PredictionRow::new(t.subject_idx, t.object_idx, scores, 0.0)
            })
            .collect();
        preds.insert(id.clone(), PredictionMatrix::new(id.clone(), PREDICATES, rows).expect("valid rows"));
    }
    preds
}

pub struct HeadBias {
    pub head_share: f64,
    pub recall: f64,
    pub mean_recall: MeanRecall,
    pub classes_with_gt: usize,
}

pub fn run_example() -> HeadBias {
    let d = head_heavy_dataset();
    let gt = ground_truth(&d);
    let total: usize = gt.values().map(Vec::len).sum();
    let head: usize = gt.values().flatten().filter(|t| t.2 < HEADS).count();
    let preds = head_only_oracle(&d);
    // k = ∞: every prediction is kept, one per pair under the graph constraint.
    let k = usize::MAX;
    let recall = recall_at_k(&preds, &gt, k, true).expect("ground truth is non-empty");
    let mean_recall = mean_recall_at_k(&preds, &gt, PREDICATES, k, true).expect("ground truth is non-empty");
    HeadBias {
        head_share: head as f64 / total as f64,
        recall,
        classes_with_gt: mean_recall.per_predicate.iter().filter(|r| r.is_some()).count(),
        mean_recall,
    }
}

#[allow(dead_code)]
fn main() {
    let r = run_example();
    println!("share of labels on the {HEADS} head classes: {:.2}", r.head_share);
    println!("R@inf  = {:.4}", r.recall);
    println!("mR@inf = {:.4}  ({HEADS} of {} classes with ground truth)", r.mean_recall.mean, r.classes_with_gt);
}
