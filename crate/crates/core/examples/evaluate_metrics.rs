//! Scores a toy model with P-AUC, PDD, PDO and Recall@k on a dataset that
//! carries both positive and negative relation annotations.
//!
//! ```text
//! cargo run --example evaluate_metrics
//! ```

use std::collections::BTreeMap;

use haystack::dataset::{CategoryTable, Dataset, ImageRecord, RelationTriplet, SegmentedObject};
use haystack::metrics::{evaluate, EvaluateOptions, MetricReport, PredictionMatrix, PredictionRow, PredictionSet};

pub fn run_example() -> MetricReport {
    let categories = CategoryTable::new(
        vec!["person".into(), "horse".into(), "cup".into()],
        vec!["grass".into()],
        vec!["on".into(), "riding".into(), "holding".into(), "drinking from".into()],
    );
    let mut dataset = Dataset::new(categories);
    let objects = vec![
        SegmentedObject::new(1, 0),
        SegmentedObject::new(2, 1),
        SegmentedObject::new(3, 2),
        SegmentedObject::new(4, 3),
    ];
    for id in ["a", "b"] {
        dataset.images.push(ImageRecord::new(id, format!("{id}.jpg"), 640, 480).with_objects(objects.clone()));
    }

    // Image a: the person rides the horse, and is not standing on it.
    dataset.push_relation("a", RelationTriplet::positive(0, 1, 1));
    dataset.push_relation("a", RelationTriplet::negative(0, 1, 0));
    dataset.push_relation("a", RelationTriplet::positive(0, 2, 2));
    dataset.push_relation("a", RelationTriplet::negative(0, 2, 3));
    // Image b: holding but not drinking; the horse is on the grass.
    dataset.push_relation("b", RelationTriplet::positive(0, 2, 2));
    dataset.push_relation("b", RelationTriplet::negative(0, 2, 3));
    dataset.push_relation("b", RelationTriplet::positive(1, 3, 0));
    dataset.push_relation("b", RelationTriplet::negative(1, 3, 1));

    let row = |s, o, scores: [f64; 4]| PredictionRow::new(s, o, scores.to_vec(), 0.1);
    let mut preds = PredictionSet::new();
    preds.insert(
        "a".into(),
        PredictionMatrix::new("a", 4, vec![row(0, 1, [2.0, 1.5, -1.0, -3.0]), row(0, 2, [0.0, -2.0, 1.0, 1.2])])
            .expect("valid matrix"),
    );
    preds.insert(
        "b".into(),
        PredictionMatrix::new("b", 4, vec![row(0, 2, [0.3, -2.0, 2.5, 0.4]), row(1, 3, [3.0, 0.2, -1.0, -1.0])])
            .expect("valid matrix"),
    );

    let options = EvaluateOptions { ks: vec![1, 2], ..EvaluateOptions::default() };
    evaluate(&dataset, &preds, &options).expect("predictions cover every annotated pair")
}

#[allow(dead_code)]
fn main() {
    let report = run_example();
    print!("{}", report.to_table());
    let by_name: BTreeMap<_, _> = report.rows.iter().map(|r| (r.predicate.as_str(), r.p_auc)).collect();
    println!("\nP-AUC by predicate: {by_name:?}");
}
