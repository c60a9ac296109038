use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid rate set: {0}")]
    InvalidRateSet(String),

    #[error("invalid injection (packet {packet_id}): {reason}")]
    InvalidInjection { packet_id: u64, reason: String },

    #[error("invalid schedule decision on edge {edge}: {reason}")]
    InvalidDecision { edge: usize, reason: String },

    #[error("decision would drive queue ({node}, dest #{dest}) negative: {value}")]
    NegativeQueue { node: usize, dest: usize, value: f64 },

    #[error("rate set has more than {limit} maximal vectors; use the matching solver")]
    EnumerationLimit { limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("witness violation: {0}")]
    Witness(String),

    #[error("rate-share allocation infeasible on edge {edge} in window {window}: short by {shortfall}")]
    InfeasibleAllocation {
        edge: usize,
        window: u64,
        shortfall: f64,
    },

    #[error("assignment residual went negative ({what} = {value})")]
    NegativeResidual { what: &'static str, value: f64 },

    #[error("bound recursion exceeded its work budget: {0}")]
    BudgetExceeded(String),

    #[error("probe failed: {0}")]
    Probe(String),
}
