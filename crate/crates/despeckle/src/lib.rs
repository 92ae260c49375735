//! Self-supervised despeckling of SAR-like intensity images.
//!
//! The crate covers the full desk-scale loop: multiplicative speckle
//! simulation under the gamma model, the log-domain loss functions used for
//! training on noisy pairs, a compact residual encoder-decoder with manual
//! reverse-mode differentiation, the three-phase training pipeline with
//! temporal change compensation, and the evaluation metrics (amplitude PSNR,
//! ENL, residual-speckle Wasserstein distance).

pub mod cli;
pub mod efficiency;
pub mod eval;
pub mod image;
pub mod io;
pub mod losses;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod special;
pub mod speckle;

use std::path::PathBuf;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// configuration problems exit with 2, numeric failures with 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain mismatch: expected {expected}, got {actual}")]
    DomainMismatch { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("missing prerequisite artifact: {0}")]
    MissingArtifact(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI exit code for this error: 2 for config/usage problems, 3 for
    /// numeric failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
