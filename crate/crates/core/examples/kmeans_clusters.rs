//! Clusters image embeddings into diverse groups, drops a cluster that must
//! not be annotated, and samples the remaining clusters uniformly.
//!
//! ```text
//! cargo run --example kmeans_clusters
//! ```

use std::collections::BTreeMap;

use haystack::proposal::{kmeans, sample_cluster, ClusterModel, FeatureMatrix, KMeansConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three well separated Gaussian-ish blobs in 8 dimensions; the blob index is
/// encoded in the image id.
fn blobs(per_blob: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [[0.0; 8], [10.0; 8], [-10.0; 8]];
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (b, center) in centers.iter().enumerate() {
        for i in 0..per_blob {
            ids.push(format!("blob{b}_{i:03}"));
            rows.push(center.iter().map(|c| c + rng.random_range(-1.0..1.0)).collect());
        }
    }
    FeatureMatrix::from_rows(ids, rows).expect("rectangular")
}

pub fn run_example() -> ClusterModel {
    let features = blobs(60, 3);
    let mut model =
        kmeans(&features, &KMeansConfig { k: 3, seed: 11, ..KMeansConfig::default() }).expect("enough distinct rows");
    // e.g. a cluster of screenshots that should never reach annotators
    let screenshots = model.cluster_of("blob2_000").expect("assigned");
    model.set_excluded([screenshots]).expect("cluster exists");
    model
}

#[allow(dead_code)]
fn main() {
    let model = run_example();
    for c in 0..model.k() {
        let members: Vec<&str> = model.members(c).collect();
        let excluded = if model.is_excluded(c) { " (excluded)" } else { "" };
        println!("cluster {c}: {} images, e.g. {}{excluded}", members.len(), members[0]);
    }
    println!("SSE per iteration: {:?}", model.sse_history);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut draws = BTreeMap::new();
    for _ in 0..1000 {
        *draws.entry(sample_cluster(&model, &mut rng).expect("active clusters")).or_insert(0) += 1;
    }
    println!("1000 draws over active clusters: {draws:?}");
}
