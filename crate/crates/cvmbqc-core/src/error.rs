use alloc::string::String;

/// Errors raised by the analysis core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("mode index {index} out of range for {n_modes} modes")]
    IndexOutOfRange { index: usize, n_modes: usize },

    #[error("mode index {0} listed more than once")]
    DuplicateMode(usize),

    /// The homodyne bases leave the ancilla elimination singular.
    #[error("measurement-degenerate basis (reciprocal condition number {rcond:.3e})")]
    MeasurementDegenerate { rcond: f64 },

    #[error("no angle given for measured mode {0}")]
    MissingAngle(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate conditioning: measured variance {0:.3e}")]
    DegenerateConditioning(f64),

    #[error("grid resolution: {0}")]
    Resolution(String),

    #[error("malformed graph: {0}")]
    MalformedGraph(String),
}

pub type Result<T> = core::result::Result<T, Error>;
