use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("design matrix is rank deficient at column {column}{}", span_note(.empty_span))]
    RankDeficient {
        column: usize,
        empty_span: Option<(f64, f64)>,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("ellipsoid membership violated: {0}")]
    Membership(String),

    #[error("truth prefix too short: have {have} coefficients, need at least {need}")]
    Truncation { have: usize, need: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("expansion point lies off the regressor span (residual {residual:e})")]
    OffSpan { residual: f64 },

    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {} at line {line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn span_note(span: &Option<(f64, f64)>) -> String {
    match span {
        Some((lo, hi)) => format!(" (knot span ({lo}, {hi}] contains no design points)"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
