use alloc::string::String;

/// Errors raised by the trading algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A scalar argument fell outside the range an operation accepts.
    #[error("{what} out of range: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid rate sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid threshold function: {0}")]
    InvalidThreshold(String),

    /// A bracketed root search had no sign change.
    #[error("root finding failed: {0}")]
    Numeric(String),

    /// Parameters that cannot be satisfied by any online algorithm, such as a
    /// robustness target below the optimal competitive ratio.
    #[error("unattainable parameters: {0}")]
    Parameter(String),

    /// The adaptive trader reached a state from which the robustness target can
    /// no longer be guaranteed.
    #[error("infeasible trader state: utilization {utilization}, profit {profit}, rate {rate}")]
    InfeasibleState {
        utilization: f64,
        profit: f64,
        rate: f64,
    },

    #[error("profit vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
