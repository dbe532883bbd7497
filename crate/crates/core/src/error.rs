//! Crate-wide error type.

use crate::model::MoceModel;

pub type Result<T> = std::result::Result<T, MoceError>;

#[derive(Debug, thiserror::Error)]
pub enum MoceError {
    /// A required column is missing or the column layout is inconsistent.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell failed to parse; row numbers are 1-based data rows (header excluded).
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Input violates a domain constraint (non-positive time, bad event flag, ties, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Features with zero sample variance, by column index.
    #[error("zero-variance feature(s) at column index(es) {0:?}")]
    ZeroVariance(Vec<usize>),

    /// Exact-objective enumeration would exceed the configured cap.
    #[error("exact objective intractable: K^|risk set| = {assignments:.3e} exceeds cap {cap}")]
    Intractable { assignments: f64, cap: u64 },

    #[error("dataset contains no uncensored subjects")]
    NoUncensoredSubjects,

    #[error("no comparable pairs: {0}")]
    NoComparablePairs(String),

    /// Non-finite gradient entries, reported per parameter block.
    #[error("non-finite gradient in parameter block(s): {0}")]
    NonFiniteGradient(String),

    /// Training objective or gradient left the finite range. Carries the last
    /// finite parameter state so callers can inspect or salvage it.
    #[error("training diverged at epoch {epoch} (last finite objective {last_objective}): {message}")]
    Divergence {
        epoch: usize,
        last_objective: f64,
        message: String,
        last_model: Box<MoceModel>,
    },

    /// Model file does not match the expected text format.
    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
