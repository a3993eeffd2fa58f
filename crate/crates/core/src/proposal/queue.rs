use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cooccurrence::{is_plausible, CooccurrenceStats};
use super::kmeans::ClusterModel;
use super::scoring::{log_proposal_score, ScoreKind};
use super::ProposalError;
use crate::dataset::Dataset;
use crate::metrics::PredictionSet;

/// A candidate relation waiting for a human decision on one predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub proposal_id: String,
    pub image_id: String,
    pub subject_idx: usize,
    pub object_idx: usize,
    pub predicate_id: usize,
    /// `softmax_p / softmax_no_relation`, saturating at `f64::MAX`.
    pub ranking_score: f64,
    pub cluster_id: Option<usize>,
}

impl Proposal {
    /// Stable id derived from the proposed triplet.
    pub fn make_id(image_id: &str, subject_idx: usize, object_idx: usize, predicate_id: usize) -> String {
        format!("{image_id}:{subject_idx}:{object_idx}:{predicate_id}")
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.subject_idx, self.object_idx)
    }
}

/// Objects and triplets that must not be proposed, on top of what the image
/// dataset itself already marks as faulty or annotated.
#[derive(Debug, Clone, Default)]
pub struct Exclusions {
    pub faulty_objects: HashSet<(String, usize)>,
    pub annotated: HashSet<(String, usize, usize, usize)>,
}

impl Exclusions {
    pub fn from_dataset(d: &Dataset) -> Self {
        Self { faulty_objects: d.faulty_objects(), annotated: d.annotated_keys() }
    }

    pub fn extend(&mut self, other: Exclusions) {
        self.faulty_objects.extend(other.faulty_objects);
        self.annotated.extend(other.annotated);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    pub per_cluster_quota: usize,
    pub seed: u64,
    pub score_kind: ScoreKind,
}

impl Default for QueueConfig {
    fn default() -> Self {
        Self { per_cluster_quota: 20, seed: 0, score_kind: ScoreKind::Logits }
    }
}

struct Candidate {
    log_score: f64,
    image_order: usize,
    proposal: Proposal,
}

/// Builds the annotation queue for one predicate.
///
/// Clusters are visited in a seeded uniform random order. Within a cluster,
/// plausible and not yet excluded candidates are ranked by descending score
/// and cut to the quota. The final queue takes one proposal from each
/// cluster in turn. Without a cluster model every image is in one pool
/// (or in its own `cluster_id`, when the image record carries one).
pub fn build_proposal_queue(
    images: &Dataset,
    preds: &PredictionSet,
    predicate: usize,
    stats: &CooccurrenceStats,
    clusters: Option<&ClusterModel>,
    exclusions: &Exclusions,
    config: &QueueConfig,
) -> Result<Vec<Proposal>, ProposalError> {
    if predicate >= images.categories.num_predicates() {
        return Err(ProposalError::InvalidConfig(format!("predicate {predicate} out of range")));
    }
    let own = Exclusions::from_dataset(images);
    let excluded_object = |id: &str, idx: usize| {
        own.faulty_objects.contains(&(id.to_string(), idx))
            || exclusions.faulty_objects.contains(&(id.to_string(), idx))
    };
    let annotated =
        |key: &(String, usize, usize, usize)| own.annotated.contains(key) || exclusions.annotated.contains(key);

    let mut pools: BTreeMap<Option<usize>, Vec<Candidate>> = BTreeMap::new();
    for (image_order, img) in images.images.iter().enumerate() {
        let cluster = match clusters {
            Some(model) => match model.cluster_of(&img.image_id) {
                Some(c) if model.is_excluded(c) => continue,
                Some(c) => Some(c),
                None => continue,
            },
            None => img.cluster_id,
        };
        let Some(matrix) = preds.get(&img.image_id) else {
            continue;
        };
        for row in matrix.rows() {
            let (s, o) = row.pair();
            let (Some(subj), Some(obj)) = (img.objects.get(s), img.objects.get(o)) else {
                continue;
            };
            if s == o || excluded_object(&img.image_id, s) || excluded_object(&img.image_id, o) {
                continue;
            }
            if annotated(&(img.image_id.clone(), s, o, predicate)) {
                continue;
            }
            if !is_plausible(stats, subj.category_id, predicate, obj.category_id) {
                continue;
            }
            let log_score = log_proposal_score(&row.scores, row.no_relation_score, predicate, config.score_kind)?;
            pools.entry(cluster).or_default().push(Candidate {
                log_score,
                image_order,
                proposal: Proposal {
                    proposal_id: Proposal::make_id(&img.image_id, s, o, predicate),
                    image_id: img.image_id.clone(),
                    subject_idx: s,
                    object_idx: o,
                    predicate_id: predicate,
                    ranking_score: log_score.exp().min(f64::MAX),
                    cluster_id: cluster,
                },
            });
        }
    }

    let mut order: Vec<Option<usize>> = pools.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));

    let mut ranked: Vec<std::vec::IntoIter<Candidate>> = order
        .iter()
        .map(|c| {
            let mut pool = pools.remove(c).expect("key from pools");
            pool.sort_by(|a, b| {
                b.log_score
                    .total_cmp(&a.log_score)
                    .then(a.image_order.cmp(&b.image_order))
                    .then(a.proposal.pair().cmp(&b.proposal.pair()))
            });
            pool.truncate(config.per_cluster_quota);
            pool.into_iter()
        })
        .collect();

    let mut queue = Vec::with_capacity(ranked.iter().map(|it| it.len()).sum());
    loop {
        let before = queue.len();
        for it in &mut ranked {
            if let Some(c) = it.next() {
                queue.push(c.proposal);
            }
        }
        if queue.len() == before {
            break;
        }
    }
    Ok(queue)
}
