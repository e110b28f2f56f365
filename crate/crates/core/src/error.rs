use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by [`ErrorKind`] so the CLI can map them onto exit
/// codes without matching on each one.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape violation: {0}")]
    ShapeViolation(String),
    #[error("class probabilities at voxel {voxel} sum to {sum}, outside 1 ± {tolerance}")]
    SumViolation { voxel: usize, sum: f64, tolerance: f64 },
    #[error("probability {value} for class {class} at voxel {voxel} is outside [0, 1]")]
    RangeViolation { voxel: usize, class: usize, value: f64 },
    #[error("label {label} at voxel {voxel} is not below the class count {classes}")]
    LabelOutOfRange { voxel: usize, label: u8, classes: usize },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("volume header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("unsupported dtype `{0}`")]
    UnsupportedDtype(String),
    #[error("unsupported volume layout: {0}")]
    UnsupportedLayout(String),

    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("rater variance needs at least 2 raters, got {0}")]
    TooFewRaters(usize),
    #[error("inter-model disagreement is undefined for a single member")]
    SingleMember,

    #[error("calibration domain contains no voxels")]
    NoVoxels,
    #[error("consensus map has no label boundary, boundary band is empty")]
    EmptyBand,
    #[error("correlation needs at least 2 voxels, got {0}")]
    TooFewVoxels(usize),
    #[error("risk-coverage curve needs at least one case")]
    EmptyInput,

    #[error("bootstrap needs at least 2 cases, got {0}")]
    TooFewCases(usize),
    #[error("paired samples are misaligned: {0}")]
    MisalignedCases(String),

    #[error("{groups} distinct image ids cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },
    #[error("degenerate phantom spec: {0}")]
    DegenerateSpec(String),

    #[error("schema error: {0}")]
    Schema(String),
    #[error("case `{case}` references missing file {}", path.display())]
    DanglingPath { case: String, path: PathBuf },
    #[error("case `{case}`: {detail}")]
    ShapeInconsistency { case: String, detail: String },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Coarse failure class, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Computation,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Io { .. } => ErrorKind::Io,
            ShapeViolation(_)
            | SumViolation { .. }
            | RangeViolation { .. }
            | LabelOutOfRange { .. }
            | HeaderMismatch(_)
            | UnsupportedDtype(_)
            | UnsupportedLayout(_)
            | Schema(_)
            | DanglingPath { .. }
            | ShapeInconsistency { .. }
            | UnknownMetric(_)
            | InvalidArgument(_) => ErrorKind::Validation,
            _ => ErrorKind::Computation,
        }
    }

    /// 2 for schema/validation errors, 3 for computation errors, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Validation => 2,
            ErrorKind::Computation => 3,
            ErrorKind::Io => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
