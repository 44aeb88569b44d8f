use thiserror::Error;

/// Errors raised by the tail-bound pipelines and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A moment integral or a tail functional failed to stabilize.
    #[error("divergence: {0}")]
    Divergence(String),

    /// The GLS norm ratio kept growing at the edge of the common domain.
    #[error("unbounded GLS norm: {0}")]
    UnboundedNorm(String),

    /// The Young-Fenchel objective kept growing at the right edge of an infinite domain.
    #[error("Young-Fenchel supremum unbounded at u = {u}")]
    UnboundedDual { u: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    #[error("partition cell {cell} received only {count} samples")]
    EmptyCell { cell: usize, count: usize },

    #[error("wrong specification kind: {0}")]
    WrongKind(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("sampler failure: {0}")]
    Sampler(String),
}

pub type Result<T> = std::result::Result<T, GlsError>;

impl GlsError {
    /// True for the numeric-divergence family (moment, norm or dual blow-up).
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            GlsError::Divergence(_) | GlsError::UnboundedNorm(_) | GlsError::UnboundedDual { .. }
        )
    }
}
