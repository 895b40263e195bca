//! Dataset containers and loaders.
//!
//! Everything here is built around the feature-indexed layout: instead of one
//! sparse vector per instance, the store keeps one sparse vector per feature,
//! listing the instances (or sequence positions) where that feature is
//! nonzero. Gradient accumulation for a single coordinate then touches only
//! the instances related to that feature, which is what makes working-set
//! solvers cheap on sparse models.

mod degree2;
mod matrix;
mod ocr;
mod sequence;
mod svmlight;
mod taxonomy;

pub use degree2::{degree2_feature_count, expand_degree2_features, pair_feature_index};
pub use matrix::{FeatureIndexedMatrix, FeatureMatrixBuilder};
pub use ocr::load_ocr;
pub use sequence::{PositionFeatures, SequenceDataset};
pub use svmlight::{load_svmlight_binary, parse_svmlight, BinaryDataset, ScaleMode, SvmlightFile};
pub use taxonomy::{load_svmlight_with_taxonomy, Taxonomy, TaxonomyDataset};

use std::path::PathBuf;
use thiserror::Error;

/// Errors raised while building or loading datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate entry for feature {feature}, instance {instance}")]
    DuplicateEntry { feature: usize, instance: usize },
    #[error("instance id {instance} out of range (num_instances = {num_instances})")]
    InstanceOutOfRange { instance: usize, num_instances: usize },
    #[error("feature id {feature} out of range (num_features = {num_features})")]
    FeatureOutOfRange { feature: usize, num_features: usize },
    #[error("hierarchy error: {0}")]
    Hierarchy(String),
    #[error("label {0} does not appear as a leaf in the hierarchy")]
    LabelNotLeaf(u64),
    #[error("non-finite feature value {value} for feature {feature}")]
    NonFiniteValue { feature: usize, value: f64 },
}

impl DataError {
    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        DataError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}
