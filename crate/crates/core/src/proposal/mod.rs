//! Model-assisted proposal pipeline: cluster images for diversity, filter
//! implausible triplets by training co-occurrence, rank candidates by their
//! score against "no relation".

mod config;
mod cooccurrence;
mod features;
mod kmeans;
mod queue;
mod scoring;

use thiserror::Error;

pub use config::CampaignConfig;
pub use cooccurrence::{build_cooccurrence, is_plausible, CooccurrenceStats, DEFAULT_THRESHOLD};
pub use features::{decode_features, encode_features, read_feature_matrix, write_feature_matrix, FeatureMatrix};
pub use kmeans::{kmeans, sample_cluster, ClusterModel, KMeansConfig};
pub use queue::{build_proposal_queue, Exclusions, Proposal, QueueConfig};
pub use scoring::{log_proposal_score, proposal_score, ScoreKind};

/// Number of image clusters used when none is given.
pub const DEFAULT_CLUSTERS: usize = 50;

#[derive(Debug, Error)]
pub enum ProposalError {
    #[error("score is NaN or infinite")]
    NonFiniteScore,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("every cluster is excluded")]
    AllClustersExcluded,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
