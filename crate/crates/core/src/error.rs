use std::path::PathBuf;

use thiserror::Error;

use crate::pmf::SupportKind;

/// Errors raised while loading inputs or evaluating the risk model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("invalid value at `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("cause table {table} percentages sum to {sum:.2}, expected 100 ± 0.1")]
    Checksum { table: String, sum: f64 },

    #[error("{0} does not apply to unit trains")]
    NotApplicable(&'static str),

    #[error("missing consequence curve for ({location}, {wind}, {anchor_gallons} gal)")]
    MissingCurve {
        location: String,
        wind: String,
        anchor_gallons: u32,
    },

    #[error("{quantity} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{what} evaluates to {value:e}; the linearized rate model is only valid for probabilities ≤ 1")]
    ProbabilityOverflow { what: String, value: f64 },

    #[error("cannot compare pmfs over different supports ({0:?} vs {1:?})")]
    SupportMismatch(SupportKind, SupportKind),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            origin: origin.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
