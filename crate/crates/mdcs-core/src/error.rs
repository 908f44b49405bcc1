//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants carry
//! enough context (mode index, expected/actual sizes, byte offsets) that a
//! caller can report a useful message without re-deriving the failure.

use thiserror::Error;

/// Errors produced by tensor algebra, operator construction, solving, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A mode (dimension) index was outside `0..ndim`.
    #[error("mode {mode} is out of range for a tensor with {ndim} dimensions")]
    InvalidMode { mode: usize, ndim: usize },

    /// An operator's column count did not match the tensor extent on the mode
    /// it was applied to.
    #[error(
        "shape mismatch on mode {mode}: operator has {operator_cols} columns \
         but the tensor extent is {tensor_extent}"
    )]
    ModeShapeMismatch {
        mode: usize,
        operator_cols: usize,
        tensor_extent: usize,
    },

    /// A flat buffer length disagreed with the length implied by the shape.
    #[error("length mismatch: expected {expected} elements, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// A caller-provided argument was rejected.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Materializing a flattened operator would exceed the allocation cap.
    #[error(
        "flattened operator needs {required_bytes} bytes, which exceeds the \
         cap of {cap_bytes} bytes"
    )]
    CapExceeded { required_bytes: u64, cap_bytes: u64 },

    /// The solver produced a non-finite intermediate value.
    #[error("solver produced a non-finite value during outer iteration {outer_iteration}")]
    NonFinite { outer_iteration: usize },

    /// A serialized artifact was malformed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Loaded or derived data failed a semantic consistency check.
    #[error("validation failed: {0}")]
    Validation(String),

    /// An underlying I/O operation failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
