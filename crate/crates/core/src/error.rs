use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structure failed its validity invariants.
    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// The stick tail mass exceeds what the caller tolerates.
    #[error("tail mass {tail_mass:e} exceeds tolerance {tolerance:e}; about {required_k} sticks needed")]
    TailMassTooLarge {
        tail_mass: f64,
        tolerance: f64,
        required_k: usize,
    },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// An integral required by the operation diverges.
    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("enumeration refused: n = {n} exceeds limit {limit}")]
    TooLarge { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
