use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoherenceError>;

/// A single failed validation check, reported by name so parsers can say
/// exactly which invariant a file violated.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotHermitian { max_asymmetry: f64 },
    TraceNotOne { trace: f64 },
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    NotNormalized { norm: f64 },
    BadShape { expected: usize, got: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NotHermitian { max_asymmetry } => {
                write!(f, "not Hermitian (max asymmetry {max_asymmetry:.3e})")
            }
            Violation::TraceNotOne { trace } => write!(f, "trace is {trace:.12} instead of 1"),
            Violation::NotPositiveSemidefinite { min_eigenvalue } => {
                write!(f, "not PSD (min eigenvalue {min_eigenvalue:.3e})")
            }
            Violation::NotNormalized { norm } => write!(f, "vector norm is {norm:.12}"),
            Violation::BadShape { expected, got } => {
                write!(f, "expected {expected} rows/entries, got {got}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CoherenceError {
    #[error("invalid state: {}", format_violations(.0))]
    InvalidState(Vec<Violation>),

    #[error("invalid pure state: {}", format_violations(.0))]
    InvalidPureState(Vec<Violation>),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("resource cap exceeded: {what} requires {required}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    #[error(
        "structural inconsistency: block {block:?} conditioned on the state is not pure \
         (second eigenvalue {second_eigenvalue:.3e}); tol_edge is likely misclassifying edges"
    )]
    ImpureBlock {
        block: Vec<usize>,
        second_eigenvalue: f64,
    },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("lambda(rho) = 0: the converse bound does not apply; use the relative-entropy route")]
    LambdaZero,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("uniformly coherent state of full size {expected} required")]
    NotMaximallyCoherent { expected: usize },

    #[error("max-relative-entropy cross-check disagrees with direct route by {gap:.3e}")]
    DmaxMismatch { gap: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
