pub mod adversary;
pub mod auditor;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod matching;
pub mod model;
pub mod scheduler;

pub use error::{Error, Result};
