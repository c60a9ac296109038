use std::sync::Arc;

use super::witness::{WitnessMove, WitnessSchedule};
use super::{Adversary, SlotInput, Step};
use crate::error::{Error, Result};
use crate::model::{InjectionEvent, NetworkSpec, QueueMatrix, RateSet};

/// N parallel single-hop edges, edge i = (i, N + i), destination N + i.
///
/// r_min is (1 - eps)^2 / 2, the smallest packet the construction injects;
/// the rates it hands out are 1, 1 - eps and (1 - eps) / 2.
pub fn exponential_network(n: usize, eps: f64) -> Result<NetworkSpec> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one edge".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} not in (0, 1)")));
    }
    let edges = (0..n).map(|i| (i, n + i)).collect();
    let dests = (n..2 * n).collect();
    NetworkSpec::new(2 * n, edges, dests, 1.0, half_sq(eps), 1.0)
}

fn half_sq(eps: f64) -> f64 {
    (1.0 - eps) * ((1.0 - eps) / 2.0)
}

/// One slot of the construction, given the queue heights q_i.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialMove {
    /// The single generating rate vector.
    pub rate: Vec<f64>,
    pub queue: usize,
    pub size: f64,
}

/// i' = min{i : q_i < (1 - eps) 2^i}. Returns `None` once every queue has
/// reached its threshold.
pub fn exponential_step(heights: &[f64], eps: f64) -> Option<ExponentialMove> {
    let n = heights.len();
    let ip = (0..n).find(|&i| heights[i] < (1.0 - eps) * 2f64.powi(i as i32))?;
    let mut rate = vec![0.0; n];
    if ip == 0 {
        rate[0] = 1.0;
        Some(ExponentialMove {
            rate,
            queue: 0,
            size: 1.0 - eps,
        })
    } else {
        rate[ip - 1] = 1.0 - eps;
        rate[ip] = (1.0 - eps) / 2.0;
        Some(ExponentialMove {
            rate,
            queue: ip,
            size: half_sq(eps),
        })
    }
}

/// Drives the lower-bound construction and records, for every injection,
/// the witness that serves it on its own edge in the same slot.
#[derive(Debug, Clone)]
pub struct ExponentialAdversary {
    n: usize,
    eps: f64,
    next_id: u64,
    witness: WitnessSchedule,
    /// Largest q_i seen so far, per queue.
    peak: Vec<f64>,
}

impl ExponentialAdversary {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        exponential_network(n, eps)?;
        Ok(ExponentialAdversary {
            n,
            eps,
            next_id: 0,
            witness: WitnessSchedule::default(),
            peak: vec![0.0; n],
        })
    }

    pub fn witness(&self) -> &WitnessSchedule {
        &self.witness
    }

    /// Per-queue maxima observed at the start of slots.
    pub fn peaks(&self) -> &[f64] {
        &self.peak
    }

    /// Milestone thresholds (1 - eps) 2^i.
    pub fn milestones(&self) -> Vec<f64> {
        (0..self.n).map(|i| (1.0 - self.eps) * 2f64.powi(i as i32)).collect()
    }
}

impl Adversary for ExponentialAdversary {
    fn step(&mut self, t: u64, q: &QueueMatrix) -> Result<Step> {
        let heights: Vec<f64> = (0..self.n).map(|i| q.get(i, i)).collect();
        for (p, h) in self.peak.iter_mut().zip(&heights) {
            *p = p.max(*h);
        }
        let Some(mv) = exponential_step(&heights, self.eps) else {
            return Ok(Step::Halt("every queue reached its milestone".into()));
        };
        let vectors = mv
            .rate
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 0.0)
            .map(|(i, &r)| {
                let mut v = vec![0.0; self.n];
                v[i] = r;
                v
            })
            .collect();
        let id = self.next_id;
        self.next_id += 1;
        let mut wrate = vec![0.0; self.n];
        wrate[mv.queue] = mv.rate[mv.queue];
        self.witness.rate_vectors.insert(t, wrate);
        self.witness.moves.push(WitnessMove {
            packet_id: id,
            edge: mv.queue,
            slot: t,
            amount: mv.size,
        });
        Ok(Step::Continue(SlotInput {
            rates: Arc::new(RateSet::explicit(vectors)),
            injections: vec![InjectionEvent {
                packet_id: id,
                slot: t,
                node: mv.queue,
                destination: self.n + mv.queue,
                size: mv.size,
            }],
        }))
    }
}
