//! Error types shared across the toolkit.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid localization map: {0}")]
    InvalidMap(String),

    #[error("constant map has no Otsu threshold")]
    DegenerateMap,

    #[error("image has no reference boxes")]
    EmptyReference,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("image `{image_id}` has no boxes under annotation source `{annotation}`")]
    MissingAnnotation { image_id: String, annotation: String },

    #[error("criterion `{criterion}` missing at epoch {epoch}")]
    MissingCriterion { criterion: String, epoch: u32 },

    #[error("no proposals available for image `{0}`")]
    NoProposals(String),

    #[error("degenerate localization map: fall back to objectness-only ranking")]
    DegenerateCam,

    #[error("no foreground after thresholding")]
    NoForeground,

    #[error("empty image")]
    EmptyImage,

    #[error("run manifest `{manifest}` is invalid: {reason}")]
    InvalidManifest { manifest: String, reason: String },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Schema {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by the filesystem rather than by input content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
