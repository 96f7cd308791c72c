use thiserror::Error;

use crate::sensing::Violation;

/// Errors produced by the kernels, receivers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for dimension of size {len}")]
    Index { index: usize, len: usize },

    #[error("singular value decomposition did not converge ({rows}x{cols} input)")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("all-zero input: {0}")]
    ZeroInput(String),

    #[error("degenerate normalization: {0}")]
    Degenerate(String),

    #[error("identifiability violated: {}", format_violations(.0))]
    Identifiability(Vec<Violation>),

    #[error("code matrix is not column orthonormal (max |C^T C* - I| = {deviation:.3e})")]
    NonOrthonormalCode { deviation: f64 },

    #[error("angle {0} deg outside the open interval (-90, 90)")]
    InvalidAngle(f64),

    #[error("unsupported QAM order {0} (must be a square power of two >= 4)")]
    InvalidQamOrder(usize),

    #[error("symbol index {index} out of range for {order}-QAM")]
    InvalidSymbolIndex { index: usize, order: usize },

    #[error("ALS diverged at iteration {iteration}: non-finite reconstruction error")]
    Diverged { iteration: usize },

    #[error("permutation search supports at most 8 columns, got {0}")]
    TooManyColumns(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed CSV: {0}")]
    MalformedCsv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
