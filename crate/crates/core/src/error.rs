// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at position {index}")]
    NonFiniteInput { index: usize },
    #[error("degenerate distribution: zero variance")]
    DegenerateDistribution,
    #[error("index range {start}..{end} out of bounds for length {len}")]
    IndexOutOfRange { start: usize, end: usize, len: usize },
    #[error("input too short: need at least {needed}, got {got}")]
    InputTooShort { needed: usize, got: usize },
    #[error("invalid decomposition kernel {kernel} for window length {len}")]
    InvalidKernel { kernel: usize, len: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("strategy A-IN must be resolved to a concrete strategy before fitting")]
    StrategyUnresolved,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("incomplete result grid: {0}")]
    IncompleteGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },
    #[error("empty series")]
    EmptySeries,
    #[error("{context}: {source}")]
    Cell {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParams(_) | Error::StrategyUnresolved => 1,
            Error::FileNotFound(_)
            | Error::Parse { .. }
            | Error::EmptySeries
            | Error::EmptyInput
            | Error::EmptyDataset
            | Error::InputTooShort { .. }
            | Error::IncompleteGrid(_)
            | Error::ShapeMismatch { .. }
            | Error::IndexOutOfRange { .. }
            | Error::InvalidKernel { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::NonFiniteInput { .. }
            | Error::DegenerateDistribution
            | Error::NonFiniteLoss { .. } => 3,
            Error::Cell { source, .. } => source.exit_code(),
        }
    }

    pub(crate) fn in_cell(self, context: impl Into<String>) -> Error {
        Error::Cell {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
