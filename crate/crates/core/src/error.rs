use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core estimation and modelling routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch for {what}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    /// The Fisher information matrix has (numerically) zero curvature along
    /// some direction. `parameters` names the entries of the offending
    /// null-space direction, largest weight first.
    #[error("singular information matrix, unidentifiable parameters: {parameters:?}")]
    SingularInformation { parameters: Vec<String> },

    /// Some structure classes received no observation, so their value cannot
    /// be inferred by averaging.
    #[error("structure classes without observations: {missing:?}")]
    UncoveredClasses { missing: Vec<(usize, usize)> },

    #[error("training matrix kind not supported here: {0}")]
    UnsupportedTraining(&'static str),

    #[error("all ratio terms had a zero denominator")]
    DegenerateSamples,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
