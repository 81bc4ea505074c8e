use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised anywhere in the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("all-NaN slice at timestamp {timestamp}")]
    AllNan { timestamp: i64 },
    #[error("crop out of bounds: origin ({row}, {col}) size {size} on {rows}x{cols} grid")]
    CropBounds {
        row: usize,
        col: usize,
        size: usize,
        rows: usize,
        cols: usize,
    },
    #[error("incomplete slice set, missing (timestamp, band): {0:?}")]
    MissingSlices(Vec<(i64, u8)>),
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },
    #[error("unknown parameter {0}")]
    UnknownParam(String),
}

impl Error {
    /// Short machine-parsable category used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::NonFinite { .. } | Error::Diverged { .. } => "numeric",
            Error::Invalid(_) | Error::UnknownParam(_) => "invalid",
            Error::AllNan { .. } | Error::CropBounds { .. } | Error::MissingSlices(_) => "data",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
