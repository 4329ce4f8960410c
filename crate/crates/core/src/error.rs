use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("image is {width}x{height}, at least 2x2 is required")]
    ImageTooSmall { width: usize, height: usize },

    #[error("invalid pixel data: {0}")]
    InvalidPixels(String),

    #[error("degenerate contrast: max pixel equals min pixel ({0})")]
    DegenerateContrast(f64),

    #[error("lambda must be > 0, got {0}")]
    InvalidLambda(f64),

    #[error("alpha must be > 0, got {0}")]
    InvalidAlpha(f64),

    #[error("empty code: alpha {alpha} with foreground mass {mass} yields zero points")]
    EmptyCode { alpha: f64, mass: f64 },

    #[error("quasi-random sequence has {available} points, {requested} requested")]
    SequenceTooShort { requested: usize, available: usize },

    #[error("sequence dimension {found} does not match expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("code too short for degree {degree}: {points} points, {terms} monomials")]
    CodeTooShort {
        degree: u32,
        points: usize,
        terms: usize,
    },

    #[error("underdetermined least squares: {rows} rows for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("degenerate target scale: all target points coincide")]
    DegenerateTargetScale,

    #[error("empty code")]
    NoPoints,

    #[error("not in transformation family: {0}")]
    NotInFamily(String),

    #[error("malformed code file: {0}")]
    MalformedCode(String),

    #[error("malformed CSV: {0}")]
    MalformedCsv(String),

    #[error("degenerate timing design: {0}")]
    DegenerateDesign(String),

    #[error("corpus incomplete: {0}")]
    CorpusIncomplete(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
