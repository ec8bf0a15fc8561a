use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the embedding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate image id `{0}`")]
    DuplicateImage(String),

    #[error("image `{image}`: parent instance {parent} of instance {instance} does not exist")]
    DanglingParent {
        image: String,
        instance: u32,
        parent: u32,
    },

    #[error("image `{image}`: {message}")]
    InvalidImage { image: String, message: String },

    #[error("corpus is empty after filtering")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("zero-norm vector for `{0}`")]
    ZeroVector(String),

    #[error("unknown token `{token}`{}", suggestions_suffix(.suggestions))]
    UnknownToken {
        token: String,
        suggestions: Vec<String>,
    },

    #[error("no label maps present in corpus")]
    NoLabelMaps,

    #[error("invalid label map: {0}")]
    LabelMap(String),

    #[error("image decoding failed for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn suggestions_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {})", suggestions.join(", "))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
