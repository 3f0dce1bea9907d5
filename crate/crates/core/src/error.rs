//! Crate-wide error type and pipeline stage classification.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("viewpoint lies inside the cloud's bounding sphere")]
    ViewpointInsideCloud,

    #[error("no point is visible from the requested viewpoint")]
    EmptyView,

    #[error(
        "eigensolver failed to converge: {converged}/{requested} pairs after {iterations} \
         iterations (worst residual {worst_residual:.3e})"
    )]
    ConvergenceFailure {
        iterations: usize,
        converged: usize,
        requested: usize,
        worst_residual: f64,
    },

    #[error("no eigenvalue above the positive floor; cannot build the energy grid")]
    NoPositiveEigenvalues,

    #[error("dimension mismatch: {context} (left {left}, right {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("missing asset: {0}")]
    MissingAsset(PathBuf),

    #[error("database format version {found} not supported (expected {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("duplicate database entry for ({object_class}, {task})")]
    DuplicateEntry { object_class: String, task: String },

    #[error("reasoner backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("backend response violates the expected schema: {0}")]
    SchemaViolation(String),

    #[error("no database entry shares any part vocabulary with the query")]
    NoViableProxy,

    #[error("part mapping carries no usable center pairs")]
    NoMappedCenters,

    #[error("mapped part centers nearly coincide (separation {separation:.3e} < {minimum:.3e})")]
    CoincidentPartCenters { separation: f64, minimum: f64 },

    #[error("no antipodal grasp candidate found")]
    NoCandidates,

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("affordance field has no human-grasp region")]
    NoHumanRegion,

    #[error("file format error: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pipeline stage an error is attributed to; drives CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validation,
    Reasoning,
    Alignment,
    Spectral,
    Grasp,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Validation => 2,
            Stage::Reasoning => 3,
            Stage::Alignment => 4,
            Stage::Spectral => 5,
            Stage::Grasp => 6,
        }
    }
}

impl Error {
    pub fn stage(&self) -> Stage {
        match self {
            Error::BackendUnavailable(_) | Error::SchemaViolation(_) | Error::NoViableProxy => {
                Stage::Reasoning
            }
            Error::NoMappedCenters | Error::CoincidentPartCenters { .. } => Stage::Alignment,
            Error::ConvergenceFailure { .. } | Error::NoPositiveEigenvalues => Stage::Spectral,
            Error::NoCandidates | Error::EmptyCandidates | Error::NoHumanRegion => Stage::Grasp,
            _ => Stage::Validation,
        }
    }
}
