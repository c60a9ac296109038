//! Topology, per-destination fluid queues, rate sets and slot transitions.

mod network;
mod queues;
mod rates;

pub use network::{Link, NetworkSpec};
pub(crate) use queues::pow_beta;
pub use queues::{
    apply_decision, apply_injections, potential, InjectionEvent, QueueMatrix, ScheduleDecision,
    TOL,
};
pub use rates::{enumerate_rate_vectors, RateSet};
