//! Annotation campaigns: serving proposals to annotators, recording their
//! decisions, and exporting the result as a dataset.
//!
//! All state is a fold over an append-only decision log ([`log`]). A
//! [`Campaign`] adds sessions and leases on top and serializes every write
//! through one lock, so a lease change and its log append happen together.
//! [`http`] exposes a campaign as a JSON API.

pub mod campaign;
pub mod http;
pub mod log;
pub mod state;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use campaign::{
    Acknowledgment, Campaign, CampaignPaths, Clock, LeasedProposal, ManualClock, SessionInfo, SystemClock,
    DEFAULT_LEASE_TTL_MS,
};
pub use log::{decode_log, encode_record, DecodedLog, LogRecord, LogWriter};
pub use state::{
    CampaignExport, CampaignSpec, CampaignState, CampaignStats, Conflict, FoldedState, PredicateStats, TripletConflict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    /// The predicate fits the proposed pair.
    Positive,
    /// The predicate does not fit.
    Negative,
    /// No predicate fits the pair.
    NoRelation,
    /// Not sure; the proposal goes back to the queue.
    Skip,
    FaultySubject,
    FaultyObject,
}

impl DecisionKind {
    pub fn is_terminal(self) -> bool {
        self != DecisionKind::Skip
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationDecision {
    pub proposal_id: String,
    pub decision: DecisionKind,
    pub annotator_id: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown proposal {0}")]
    UnknownProposal(String),
    #[error("unknown image {0}")]
    UnknownImage(String),
    #[error("proposal {0} is not leased to this session or its lease expired")]
    LeaseExpired(String),
    #[error("proposal {0} already has a decision from this annotator")]
    DuplicateDecision(String),
    #[error("proposal {0} was withdrawn")]
    Withdrawn(String),
    #[error("corrupt decision log: {0}")]
    CorruptLog(String),
    #[error("invalid campaign: {0}")]
    InvalidCampaign(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ServiceError::Io { path: path.display().to_string(), source }
    }

    /// Short machine-readable name, used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::UnknownProposal(_) => "unknown_proposal",
            ServiceError::UnknownImage(_) => "unknown_image",
            ServiceError::LeaseExpired(_) => "lease_expired",
            ServiceError::DuplicateDecision(_) => "duplicate_decision",
            ServiceError::Withdrawn(_) => "withdrawn",
            ServiceError::CorruptLog(_) => "corrupt_log",
            ServiceError::InvalidCampaign(_) => "invalid_campaign",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Io { .. } => "io",
        }
    }
}
