use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    Format(String),

    #[error("unparsable cell at row {row}, column {column}: {value:?}")]
    Cell {
        /// 1-based data row (header excluded).
        row: usize,
        /// 1-based column (the date column is 1).
        column: usize,
        value: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("dates out of order at row {row}: {date} does not follow {previous}")]
    Ordering {
        row: usize,
        date: String,
        previous: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("asset {0:?} has zero variance")]
    DegenerateAsset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("all reconstruction errors are zero")]
    DegenerateScores,

    #[error("entropy domain error: {0}")]
    Domain(String),

    #[error("t-test error: {0}")]
    Test(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{context}: {source}")]
    Stage {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the module and period it came from.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Stage {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) => 2,
            Error::Divergence { .. } => 4,
            _ => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_see_through_context() {
        let diverged = Error::Divergence {
            epoch: 3,
            loss: f64::NAN,
        };
        assert_eq!(diverged.exit_code(), 4);
        assert_eq!(diverged.context("autoencoder [crisis]").exit_code(), 4);
        assert_eq!(
            Error::Config("x".into())
                .context("a")
                .context("b")
                .exit_code(),
            2
        );
        assert_eq!(Error::InsufficientData("x".into()).exit_code(), 3);
    }

    #[test]
    fn context_prefixes_the_message() {
        let e = Error::Test("both samples have zero variance".into()).context("stats: a vs b");
        assert!(e.to_string().starts_with("stats: a vs b: "));
    }
}
