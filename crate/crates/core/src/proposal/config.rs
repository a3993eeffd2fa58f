use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cooccurrence::DEFAULT_THRESHOLD;
use super::ProposalError;

/// Campaign settings read from a TOML file:
///
/// ```toml
/// excluded_clusters = [3, 17]
/// per_cluster_quota = 20
/// threshold = 2
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub excluded_clusters: Vec<usize>,
    pub per_cluster_quota: usize,
    pub threshold: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self { excluded_clusters: Vec::new(), per_cluster_quota: 20, threshold: DEFAULT_THRESHOLD }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, ProposalError> {
        toml::from_str(text).map_err(|e| ProposalError::InvalidConfig(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ProposalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProposalError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }
}
