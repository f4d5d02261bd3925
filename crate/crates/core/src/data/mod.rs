//! Solid documents, dataset splits, minibatching and synthetic solids.

mod batch;
mod document;
mod split;
mod synth;

pub use batch::{make_batches, plan_batches, plan_batches_in_order, Batch};
pub use document::{
    parse_document, read_dataset, write_dataset, CoedgeRecord, DatasetReport, FaceRecord, SegmentLabel,
    SkippedDocument, SolidDocument, SolidRecord,
};
pub use split::{split, Split, SplitFile, SplitRatios};
pub use synth::{
    generate_synthetic, shuffle_indices, synthetic_corpus, SynthError, SynthKind, SynthParams, SyntheticSolid,
};

use std::path::Path;

use crate::features::StandardizeError;
use crate::topology::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("topology validation failed: {0}")]
    Validation(ValidationReport),
    #[error("invalid split ratios: {0}")]
    Ratios(String),
    #[error(transparent)]
    Standardize(#[from] StandardizeError),
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io { path: path.display().to_string(), source }
    }
}
