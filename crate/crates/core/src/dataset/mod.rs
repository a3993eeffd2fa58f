//! Dataset model and the PSG-compatible annotation file with explicit
//! negative annotations.

mod format;
mod labels;
mod merge;
mod model;
mod validate;

use std::path::Path;

use thiserror::Error;

pub use format::{export_dataset, export_dataset_pretty, parse_dataset, parse_dataset_unchecked};
pub use labels::{build_label_matrix, Label, LabelVector};
pub use merge::merge_datasets;
pub use model::{CategoryTable, Dataset, ImageRecord, Polarity, RelationTriplet, SegmentedObject};
pub use validate::{validate_dataset, ValidationReport, Violation, ViolationKind};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed annotation file: {0}")]
    Schema(String),
    #[error("invalid index: {0}")]
    Index(String),
    #[error("duplicate annotation: {0}")]
    Duplicate(String),
    #[error("datasets use different category tables")]
    CategoryMismatch,
    #[error("merge conflict: {0}")]
    Conflict(String),
    #[error("merged dataset is invalid: {0}")]
    Invalid(String),
    #[error("unknown image {0}")]
    UnknownImage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Reads and parses an annotation file from disk.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_dataset(&bytes)
}

pub fn write_dataset(path: impl AsRef<Path>, d: &Dataset) -> Result<(), DatasetError> {
    let path = path.as_ref();
    std::fs::write(path, export_dataset(d))
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })
}
