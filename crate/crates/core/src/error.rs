use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("constant map: population std is at or below the degeneracy threshold")]
    ConstantMap,

    #[error("fixation map has no fixated cells")]
    EmptyFixations,

    #[error("mask has no nonzero cells")]
    EmptyMask,

    #[error("no fixations fall inside the region mask")]
    NoFixationsInRegion,

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("channel count mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("at least {required} values are required, got {found}")]
    TooFewValues { required: usize, found: usize },

    #[error("ranks are undefined: every value in the input is equal")]
    UndefinedRanks,

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("unknown category label {found:?}; expected one of: {expected}")]
    UnknownCategory { found: String, expected: String },

    #[error("empty mask for region {region_id} of image {image_id:?}")]
    EmptyRegionMask { image_id: String, region_id: i64 },

    #[error("point ({row}, {col}) lies outside the {height}x{width} frame")]
    PointOutOfFrame {
        row: f64,
        col: f64,
        height: usize,
        width: usize,
    },

    #[error("duplicate image id {0:?}")]
    DuplicateImageId(String),

    #[error("missing file for {what}: {path}")]
    MissingFile { what: String, path: PathBuf },

    #[error("image {image_id:?} has no activation dump for layer {layer:?}")]
    MissingLayer { image_id: String, layer: String },

    #[error("image {image_id:?} has no {what}")]
    MissingData { image_id: String, what: String },

    #[error("manifest is empty")]
    EmptyManifest,

    #[error("no usable regions for category {0}")]
    NoUsableRegions(String),

    #[error("at least 3 shared categories are required, found {0}")]
    TooFewCategories(usize),

    #[error("every training batch was degenerate")]
    AllBatchesDegenerate,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("item does not fit in its cell: {0}")]
    ItemTooLarge(String),

    #[error("density cluster overflow: {0}")]
    ClusterOverflow(String),

    #[error("target and distractors are identical; no singleton")]
    NoSingleton,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("npy error on {path}: {message}")]
    Npy { path: PathBuf, message: String },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }
}
