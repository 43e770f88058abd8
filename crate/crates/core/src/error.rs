use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid measurement settings: {0}")]
    InvalidSettings(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid time step dt = {0}")]
    InvalidStep(f64),

    #[error("degenerate posterior update: both branch weights underflowed at outcome {outcome}")]
    DegenerateUpdate { outcome: f64 },

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("true state must be pure for fidelity experiments (purity = {purity})")]
    NotPure { purity: f64 },

    #[error("trial {index} failed: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}
