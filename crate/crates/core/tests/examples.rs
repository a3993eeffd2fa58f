//! Runs every example and checks what it demonstrates.

#[path = "../examples/annotation_campaign.rs"]
mod annotation_campaign;
#[path = "../examples/dataset_merge.rs"]
mod dataset_merge;
#[path = "../examples/evaluate_metrics.rs"]
mod evaluate_metrics;
#[path = "../examples/http_api.rs"]
mod http_api;
#[path = "../examples/kmeans_clusters.rs"]
mod kmeans_clusters;
#[path = "../examples/proposal_queue.rs"]
mod proposal_queue;
#[path = "../examples/recall_head_bias.rs"]
mod recall_head_bias;

use axum::http::StatusCode;
use haystack::dataset::{validate_dataset, Polarity};

#[test]
fn evaluate_metrics_reports_only_predicates_with_both_labels() {
    let report = evaluate_metrics::run_example();
    let included: Vec<_> = report.rows.iter().map(|r| r.predicate.as_str()).collect();
    assert_eq!(included, ["on", "riding"]);
    let excluded: Vec<_> =
        report.excluded.iter().filter(|s| s.positives + s.negatives > 0).map(|s| s.predicate.as_str()).collect();
    assert_eq!(excluded, ["holding", "drinking from"]);
    assert!(report.to_table().contains("mean"));
}

#[test]
fn recall_head_bias_matches_the_head_share() {
    let r = recall_head_bias::run_example();
    assert!((r.head_share - 0.52).abs() < 1e-12);
    assert!((r.recall - 0.52).abs() < 0.01);
    assert!((r.mean_recall.mean - 3.0 / r.classes_with_gt as f64).abs() < 0.01);
}

#[test]
fn dataset_merge_adds_counts() {
    let out = dataset_merge::run_example();
    for pol in [Polarity::Positive, Polarity::Negative] {
        assert_eq!(out.merged.num_polarity(pol), out.base.num_polarity(pol) + out.addition.num_polarity(pol));
    }
    assert!(validate_dataset(&out.merged).is_valid());
}

#[test]
fn kmeans_clusters_separates_blobs() {
    let model = kmeans_clusters::run_example();
    for blob in 0..3 {
        let clusters: std::collections::BTreeSet<_> = model
            .assignments
            .iter()
            .filter(|(id, _)| id.starts_with(&format!("blob{blob}_")))
            .map(|(_, &c)| c)
            .collect();
        assert_eq!(clusters.len(), 1);
    }
    assert_eq!(model.active_clusters().len(), 2);
}

#[test]
fn proposal_queue_filters_and_interleaves() {
    let queue = proposal_queue::run_example();
    assert!(!queue.is_empty());
    // Only (subject 0, object 1) pairs survive: nothing eats a table and
    // bananas eat nothing.
    assert!(queue.iter().all(|p| p.pair() == (0, 1)));
    assert!(queue.iter().all(|p| p.image_id != "cand4"));
    let first_round: std::collections::BTreeSet<_> = queue.iter().take(3).map(|p| p.cluster_id).collect();
    assert_eq!(first_round.len(), 3);
}

#[test]
fn annotation_campaign_recovers_identically() {
    let run = annotation_campaign::run_example();
    assert_eq!(run.before_crash.dataset, run.after_recovery.dataset);
    assert_eq!(run.before_crash.retrain, run.after_recovery.retrain);
    let d = &run.after_recovery.dataset;
    assert_eq!(d.num_polarity(Polarity::Positive), 1);
    // one negative, plus three from "no relation"
    assert_eq!(d.num_polarity(Polarity::Negative), 4);
    assert!(validate_dataset(d).is_valid());
}

#[test]
fn http_api_exchanges() {
    let log = http_api::run_example();
    let statuses: Vec<_> = log.iter().map(|(_, s, _)| *s).collect();
    assert_eq!(
        statuses,
        [
            StatusCode::CREATED,
            StatusCode::OK,
            StatusCode::OK,
            StatusCode::OK,
            StatusCode::CONFLICT,
            StatusCode::NO_CONTENT,
            StatusCode::OK,
            StatusCode::OK,
        ]
    );
    let next = &log[2].2;
    assert_eq!(next["display_name"], "engaged in activity using");
    assert_eq!(next["image_url"], "/images/42.jpg");
    assert_eq!(log[4].2["error"], "duplicate_decision");
    assert_eq!(log[7].2["data"][0]["relations"], serde_json::json!([[0, 1, 1]]));
}
