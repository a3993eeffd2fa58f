//! Evaluation metrics for rare predicate classes in panoptic scene graph
//! generation, and the model-assisted pipeline used to collect positive and
//! negative relation annotations for them.
//!
//! * [`dataset`]: the PSG-compatible annotation file with explicit negatives.
//! * [`metrics`]: P-AUC, PDD, PDO and Recall@k / mean Recall@k.
//! * [`proposal`]: image clustering, co-occurrence filtering and proposal
//!   ranking.
//! * [`service`]: annotation campaign state, leases, the decision log and the
//!   HTTP API.
//! * [`cli`]: the `haystack` command line.

pub mod cli;
pub mod dataset;
pub mod metrics;
pub mod proposal;
pub mod service;
