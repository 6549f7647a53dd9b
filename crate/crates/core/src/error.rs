// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LbdError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LbdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Data that violates the selected model. `index` is 0-based into the series.
    #[error("invalid data at index {index}: {reason}")]
    InvalidData { index: usize, reason: String },

    #[error("invalid triplet (s={s}, m={m}, e={e}): {reason}")]
    InvalidTriplet {
        s: usize,
        m: usize,
        e: usize,
        reason: String,
    },

    #[error("changepoint not detectable: energy {energy:.6} < threshold {threshold:.6}")]
    NotDetectable { energy: f64, threshold: f64 },

    #[error("precision bound is unbounded: g(m) = {g:.6} >= m = {m}")]
    UnboundedPrecision { g: f64, m: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed text input. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl LbdError {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        LbdError::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_data(index: usize, reason: impl Into<String>) -> Self {
        LbdError::InvalidData {
            index,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(self, LbdError::InvalidData { .. } | LbdError::Parse { .. })
    }
}
