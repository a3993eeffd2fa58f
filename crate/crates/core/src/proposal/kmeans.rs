//! Lloyd's k-means with k-means++ seeding.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use super::ProposalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { k: super::DEFAULT_CLUSTERS, seed: 0, max_iters: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: BTreeMap<String, usize>,
    /// Clusters whose images must never be proposed.
    pub excluded_clusters: BTreeSet<usize>,
    /// Within-cluster sum of squares after every assignment step.
    pub sse_history: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn cluster_of(&self, image_id: &str) -> Option<usize> {
        self.assignments.get(image_id).copied()
    }

    pub fn is_excluded(&self, cluster: usize) -> bool {
        self.excluded_clusters.contains(&cluster)
    }

    /// Clusters still open for sampling, ascending.
    pub fn active_clusters(&self) -> Vec<usize> {
        (0..self.k()).filter(|c| !self.is_excluded(*c)).collect()
    }

    pub fn set_excluded(&mut self, excluded: impl IntoIterator<Item = usize>) -> Result<(), ProposalError> {
        let excluded: BTreeSet<usize> = excluded.into_iter().collect();
        if let Some(&bad) = excluded.iter().find(|&&c| c >= self.k()) {
            return Err(ProposalError::InvalidConfig(format!(
                "excluded cluster {bad} but only {} clusters exist",
                self.k()
            )));
        }
        self.excluded_clusters = excluded;
        Ok(())
    }

    /// Images of one cluster in ascending id order.
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = &str> {
        self.assignments.iter().filter(move |(_, &c)| c == cluster).map(|(id, _)| id.as_str())
    }

    /// Nearest centroid for a new vector.
    pub fn assign(&self, v: &[f64]) -> usize {
        nearest(&self.centroids, v).0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the closest centroid; ties go to the lower
/// index.
fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(centroid, v);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn count_distinct(features: &FeatureMatrix) -> usize {
    // `+ 0.0` folds -0.0 into 0.0 so both hash alike.
    features.rows().map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect::<Vec<_>>()).collect::<HashSet<_>>().len()
}

fn kmeans_pp(features: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = features.len();
    let mut centroids = vec![features.row(rng.random_range(0..n)).to_vec()];
    let mut dist: Vec<f64> = features.rows().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &d) in dist.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        // Rounding at the tail can land on an already chosen point.
        if dist[pick] == 0.0 {
            pick = dist.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("non-empty");
        }
        let c = features.row(pick).to_vec();
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(features.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign_all(features: &FeatureMatrix, centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let assigned: Vec<(usize, f64)> =
        (0..features.len()).into_par_iter().map(|i| nearest(centroids, features.row(i))).collect();
    // Sequential sum keeps the SSE independent of thread scheduling.
    let sse = assigned.iter().map(|a| a.1).sum();
    (assigned.into_iter().map(|a| a.0).collect(), sse)
}

/// Clusters image embeddings. Identical inputs and seed give identical
/// models.
pub fn kmeans(features: &FeatureMatrix, config: &KMeansConfig) -> Result<ClusterModel, ProposalError> {
    let k = config.k;
    if k == 0 {
        return Err(ProposalError::InvalidConfig("k must be at least 1".into()));
    }
    if features.len() < k {
        return Err(ProposalError::DegenerateInput(format!("{} rows for {k} clusters", features.len())));
    }
    let distinct = count_distinct(features);
    if distinct < k {
        return Err(ProposalError::DegenerateInput(format!("{distinct} distinct rows for {k} clusters")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = features.dim();
    let mut centroids = kmeans_pp(features, k, &mut rng);
    let mut sse_history = Vec::new();
    let (mut labels, sse) = assign_all(features, &centroids);
    sse_history.push(sse);

    for _ in 0..config.max_iters {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(features.row(i)) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            // An empty cluster keeps its centroid.
            if counts[c] == 0 {
                continue;
            }
            let updated: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&updated, &centroids[c]).sqrt());
            centroids[c] = updated;
        }
        let (next, sse) = assign_all(features, &centroids);
        sse_history.push(sse);
        let changed = next != labels;
        labels = next;
        if shift < config.tol && !changed {
            break;
        }
    }

    let assignments = features.image_ids().iter().cloned().zip(labels).collect();
    Ok(ClusterModel { centroids, assignments, excluded_clusters: BTreeSet::new(), sse_history })
}

/// Draws one cluster uniformly from the clusters that are not excluded.
pub fn sample_cluster<R: Rng + ?Sized>(model: &ClusterModel, rng: &mut R) -> Result<usize, ProposalError> {
    let active = model.active_clusters();
    if active.is_empty() {
        return Err(ProposalError::AllClustersExcluded);
    }
    Ok(active[rng.random_range(0..active.len())])
}
