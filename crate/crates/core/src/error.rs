use thiserror::Error;

/// Errors raised by lattice construction, fitting and pricing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrstError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// A split segment whose lattice collapses or whose flow lines cross.
    #[error("contraction error at step {step} (t = {time}): {detail}")]
    Contraction {
        step: usize,
        time: f64,
        detail: String,
    },

    #[error("layer index {index} out of range (tree has {layers} layers)")]
    LayerOutOfRange { index: usize, layers: usize },

    /// Replication probability outside `[0, 1]` at node `(layer, index)`.
    #[error("arbitrage violation at node ({layer}, {index}): replication probability {q}")]
    Arbitrage { layer: usize, index: usize, q: f64 },

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("empty-data: {0}")]
    EmptyData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<GrstError>,
    },
}

impl GrstError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GrstError::InvalidParameter(msg.into())
    }

    pub(crate) fn construction(msg: impl Into<String>) -> Self {
        GrstError::Construction(msg.into())
    }

    /// True for errors that describe an infeasible model rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        match self {
            GrstError::Contraction { .. }
            | GrstError::Arbitrage { .. }
            | GrstError::Construction(_) => true,
            GrstError::Component { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, GrstError>;

/// Absolute tolerance `1e-12` scaled by `max(1, |value|)`.
pub(crate) fn scaled_tol(value: f64) -> f64 {
    1e-12 * value.abs().max(1.0)
}
