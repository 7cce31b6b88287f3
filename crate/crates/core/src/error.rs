use std::path::PathBuf;

use thiserror::Error;

use crate::accounting::Quarter;

/// Errors raised anywhere in the estimation pipeline.
///
/// Variants are grouped by the process exit code they map to: configuration
/// problems (2), bad or incomplete input data (3), and numerical breakdowns (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("invalid input `{name}`: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("{file}: row {row}, field `{field}`: {reason}")]
    Schema {
        file: PathBuf,
        row: usize,
        field: String,
        reason: String,
    },

    #[error("{file}: no data for quarter {quarter}{}", currency.as_ref().map(|c| format!(" (currency {c})")).unwrap_or_default())]
    Gap {
        file: PathBuf,
        quarter: Quarter,
        currency: Option<String>,
    },

    #[error("{file}: currency {currency} is missing")]
    MissingCurrency { file: PathBuf, currency: String },

    #[error("quarter {quarter}: only {found} daily observations, need at least {required}")]
    InsufficientDaily {
        quarter: Quarter,
        found: usize,
        required: usize,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("quarter {quarter}: {reason}")]
    Numerical { quarter: Quarter, reason: String },

    #[error("degenerate observations: {0}")]
    Degenerate(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Numerical { .. } => 4,
            Error::InvalidInput { .. }
            | Error::Schema { .. }
            | Error::Gap { .. }
            | Error::MissingCurrency { .. }
            | Error::InsufficientDaily { .. }
            | Error::Data(_)
            | Error::Degenerate(_)
            | Error::Io { .. }
            | Error::Csv { .. } => 3,
        }
    }
}
