//! Crate-wide error type.

use thiserror::Error;

/// Unified error for codec, engine, kernel, and I/O failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimensions must be at least 1x1 (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("sparsity must lie in [0, 1), got {0}")]
    InvalidSparsity(f64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("value {value} at line {line} outside the signed 8-bit range")]
    ValueRange { line: usize, value: i64 },

    #[error("format limit exceeded: {0}")]
    FormatLimit(String),

    #[error("bad magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: [u8; 4], got: [u8; 4] },

    #[error("unsupported container version {0}")]
    BadVersion(u8),

    #[error("byte stream truncated: needed {needed} bytes in {section}, had {had}")]
    Truncated {
        section: &'static str,
        needed: usize,
        had: usize,
    },

    #[error("corrupt container: {0}")]
    CorruptContainer(String),

    #[error("encoding constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("gather out of bounds: lane {lane} reads index {index} of buffer length {len}")]
    GatherOutOfBounds { lane: usize, index: i64, len: usize },

    #[error("scatter out of bounds: lane {lane} writes index {index} of buffer length {len}")]
    ScatterOutOfBounds { lane: usize, index: i64, len: usize },

    #[error("scatter offset duplicated across active lanes (index {index})")]
    DuplicateScatterOffset { index: i64 },

    #[error("lane {lane} value {value} overflows 8 bits")]
    LaneOverflow { lane: usize, value: u32 },

    #[error("32-bit accumulator overflow")]
    AccumulatorOverflow,

    #[error("mask stream inconsistent with tracking bitmap: {0}")]
    MaskCountMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
