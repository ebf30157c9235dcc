use std::path::PathBuf;

use crate::harness::TrainReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid shape {0:?}: every dimension must be at least 1")]
    InvalidShape(Vec<usize>),

    #[error("cannot broadcast shape {b:?} into {a:?}")]
    Broadcast { a: Vec<usize>, b: Vec<usize> },

    #[error("axis {axis} is out of range for a rank-{rank} tensor")]
    InvalidAxis { axis: usize, rank: usize },

    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("loss does not depend on any tensor that requires a gradient")]
    DisconnectedGraph,

    #[error("finite-difference step must be positive, got {0}")]
    InvalidEps(f64),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("gradient check failed: max relative error {max_error:e} exceeds {tolerance:e}")]
    GradCheckFailed { max_error: f64, tolerance: f64 },

    #[error("channel mismatch: input has {got} channels, layer expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("spatial size {h}x{w} is smaller than the {kh}x{kw} kernel")]
    SpatialUnderflow { h: usize, w: usize, kh: usize, kw: usize },

    #[error("2x2 max pooling needs even spatial dims, got {h}x{w}")]
    OddSpatialDim { h: usize, w: usize },

    #[error("spatial mismatch: {a:?} vs {b:?}")]
    SpatialMismatch { a: Vec<usize>, b: Vec<usize> },

    #[error("label {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLr(f64),

    #[error("channel attention reduction {reduction} leaves no hidden units for {channels} channels")]
    ReductionUnderflow { channels: usize, reduction: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}: bad magic")]
    BadMagic(PathBuf),

    #[error("{path}: unsupported version {version}")]
    UnsupportedVersion { path: PathBuf, version: u16 },

    #[error("{0}: truncated file")]
    TruncatedFile(PathBuf),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("dataset manifest is empty")]
    EmptyManifest,

    #[error("image has no band named {0:?}")]
    MissingBand(String),

    #[error("empty label list")]
    EmptyInput,

    #[error("confusion matrix has no entries")]
    EmptyMatrix,

    #[error("kappa is undefined: expected agreement is 1")]
    DegenerateMarginals,

    #[error("no samples of target class {0}")]
    NoTargetSamples(usize),

    #[error("{0} split is empty")]
    EmptySplit(&'static str),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize, report: Box<TrainReport> },
}

impl Error {
    pub(crate) fn shape(expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        Error::ShapeMismatch {
            expected: format!("{expected:?}"),
            got: format!("{got:?}"),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
