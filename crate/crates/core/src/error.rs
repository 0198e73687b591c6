use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("malformed NIfTI header: {0}")]
    MalformedHeader(String),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("singular affine (3x3 determinant {0:e})")]
    SingularAffine(f64),

    #[error("invalid axis codes: {0}")]
    InvalidAxisCodes(String),

    #[error("volume is not in {expected} orientation (found {found})")]
    WrongOrientation { expected: String, found: String },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("unknown segmentation task '{0}'")]
    UnknownTask(String),

    #[error("task '{task}' has no {resolution} resolution model")]
    UnsupportedResolution { task: String, resolution: String },

    #[error("no class map for task '{task}' version {version}")]
    UnknownClassMap { task: String, version: u8 },

    #[error("invalid class map: {0}")]
    InvalidClassMap(String),

    #[error("unknown anatomy or group selector '{0}'")]
    UnknownSelector(String),

    #[error("anatomy hierarchy contains a cycle through '{0}'")]
    HierarchyCycle(String),

    #[error("'{name}' is ambiguous: matches {matches:?}")]
    AmbiguousAnatomy { name: String, matches: Vec<String> },

    #[error("selector '{0}' resolves to no stored mask")]
    EmptySelection(String),

    #[error("coordinate {coord:?} outside shape {shape:?}")]
    CoordOutOfShape { coord: [u32; 3], shape: [usize; 3] },

    #[error("mask has no gray values to restore")]
    MissingGrayValues,

    #[error("corrupt archive: {0}")]
    CorruptArchive(String),

    #[error("archive schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("invalid volume bounds: {0}")]
    InvalidBounds(String),

    #[error("invalid configuration at '{path}': {message}")]
    Config { path: String, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Yaml(#[from] serde_yaml::Error),

    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
