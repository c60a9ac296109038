use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    pub max_queue_overall: f64,
    /// Least-squares slope of the max queue over the second half, per slot.
    pub tail_slope: f64,
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        self.verdict == Verdict::Stable
    }
}

pub const DEFAULT_SLOPE_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_PLATEAU_FACTOR: f64 = 1.5;

/// Slope of the least-squares line through (i, y_i).
pub fn least_squares_slope(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let xm = (nf - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Unstable if the tail slope exceeds `slope_threshold`; otherwise stable
/// if the second half never tops `plateau_factor` times the first half's
/// maximum; otherwise inconclusive.
pub fn stability_verdict(max_queue: &[f64], slope_threshold: f64, plateau_factor: f64) -> StabilityVerdict {
    let overall = max_queue.iter().copied().fold(0.0, f64::max);
    let half = max_queue.len() / 2;
    let (first, last) = max_queue.split_at(half);
    let tail_slope = least_squares_slope(last);
    let verdict = if max_queue.len() < 2 {
        Verdict::Inconclusive
    } else if tail_slope > slope_threshold {
        Verdict::Unstable
    } else {
        let m1 = first.iter().copied().fold(0.0, f64::max);
        let m2 = last.iter().copied().fold(0.0, f64::max);
        if m2 <= plateau_factor * m1 {
            Verdict::Stable
        } else {
            Verdict::Inconclusive
        }
    };
    StabilityVerdict {
        verdict,
        max_queue_overall: overall,
        tail_slope,
    }
}
