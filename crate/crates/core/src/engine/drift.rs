use serde::{Deserialize, Serialize};

use super::SimulationTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Mean of P(t+1) - P(t) over the qualifying slots; NaN without samples.
    pub mean_drift: f64,
    pub samples: usize,
    /// Set when no slot started with a queue at or above the threshold.
    pub empty: bool,
}

/// Empirical potential drift over the slots that start with some queue at
/// least `threshold_q` tall.
pub fn drift_diagnostic(trace: &SimulationTrace, threshold_q: f64) -> DriftReport {
    let mut prev_p = trace.initial_potential;
    let mut prev_max = trace.initial_max_queue;
    let mut sum = 0.0;
    let mut samples = 0;
    for r in &trace.records {
        if prev_max >= threshold_q {
            sum += r.potential - prev_p;
            samples += 1;
        }
        prev_p = r.potential;
        prev_max = r.max_queue;
    }
    DriftReport {
        mean_drift: if samples > 0 { sum / samples as f64 } else { f64::NAN },
        samples,
        empty: samples == 0,
    }
}
