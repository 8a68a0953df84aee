use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("weight must exceed 1")]
    DegenerateWeight,

    #[error("too many users for codebook: requested {requested}, capacity bound {bound}")]
    CapacityExceeded { requested: usize, bound: usize },

    #[error("search exhausted after {attempts} restarts")]
    SearchExhausted { attempts: usize },

    #[error("bin overflow: arrival at bin {bin} exceeds max_bins {max_bins}")]
    BinOverflow { bin: usize, max_bins: usize },

    #[error("integration failure: estimated relative error {estimate:.3e} above {tolerance:.1e}")]
    IntegrationFailure { estimate: f64, tolerance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty interference set")]
    EmptyInterferenceSet,

    #[error("dimension too large: {dimension} exceeds cap {cap}")]
    DimensionTooLarge { dimension: usize, cap: usize },

    #[error("insufficient bits: resolving BER {target:.3e} needs at least {needed} bits, got {bits}")]
    InsufficientBits { target: f64, needed: u64, bits: u64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the shape or content of a user-supplied file.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Error::Schema { .. } | Error::Parse { .. } | Error::CapacityExceeded { .. }
        )
    }
}
