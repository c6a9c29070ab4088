use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative probability {value} at flat index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1 within {tol}")]
    BadNormalization { sum: f64, tol: f64 },

    #[error("channel row {row} sums to {sum}, expected 1 within {tol}")]
    RowNotNormalized { row: usize, sum: f64, tol: f64 },

    #[error("empty alphabet or zero-length shape")]
    EmptyShape,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("output cardinality {size} exceeds the declared bound {bound}")]
    CardinalityExceeded { size: usize, bound: usize },

    #[error("enumeration would visit {needed} items, above the cap of {cap}; use sampling or Monte Carlo instead")]
    EnumerationCap { needed: u128, cap: u64 },

    #[error("domain violation: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("reduction infeasible: log2 of the x-class size ({log_class:.6}) is below log2|M0| ({log_m0:.6}), deficit {deficit:.6} bits")]
    Infeasible {
        log_class: f64,
        log_m0: f64,
        deficit: f64,
    },

    #[error("{inequality} violated: lhs {lhs} > rhs {rhs} (slack {slack})")]
    Certificate {
        inequality: &'static str,
        lhs: f64,
        rhs: f64,
        slack: f64,
    },

    #[error("schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
