//! The slot loop, traces, and the analyses run on them.

mod drift;
mod probe;
mod verdict;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, Step};
use crate::error::{Error, Result};
use crate::model::{
    apply_decision, apply_injections, potential, InjectionEvent, NetworkSpec, QueueMatrix,
    RateSet, ScheduleDecision,
};
use crate::scheduler::{max_weight_approx, ApproxParams};

pub use drift::{drift_diagnostic, DriftReport};
pub use probe::{binary_search_c, bisect_load, ProbeConfig, ProbeResult};
pub use verdict::{
    least_squares_slope, stability_verdict, StabilityVerdict, Verdict, DEFAULT_PLATEAU_FACTOR,
    DEFAULT_SLOPE_THRESHOLD,
};

/// One row of the trace, taken at the end of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub max_queue: f64,
    pub potential: f64,
    pub backlog: f64,
    pub objective: f64,
    pub delivered: f64,
}

/// Everything the auditor needs about one slot.
#[derive(Debug, Clone)]
pub struct AuditSlot {
    pub slot: u64,
    pub q_before: QueueMatrix,
    pub rates: Arc<RateSet>,
    pub decision: ScheduleDecision,
    pub q_after_service: QueueMatrix,
    pub injections: Vec<InjectionEvent>,
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub records: Vec<SlotRecord>,
    pub initial_potential: f64,
    pub initial_max_queue: f64,
    pub halted: Option<String>,
    pub audit: Vec<AuditSlot>,
    /// End-of-slot queue snapshots, oldest first, at most `snapshot_capacity`.
    pub snapshots: VecDeque<(u64, QueueMatrix)>,
    pub final_queues: QueueMatrix,
    pub injected: f64,
}

impl SimulationTrace {
    pub fn max_queue_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.max_queue).collect()
    }

    pub fn max_queue_overall(&self) -> f64 {
        self.records.iter().map(|r| r.max_queue).fold(self.initial_max_queue, f64::max)
    }

    /// Recomputes the potential of every stored snapshot and returns the
    /// largest deviation from the logged value.
    pub fn replay_error(&self, beta: f64) -> f64 {
        self.snapshots
            .iter()
            .map(|(t, q)| (potential(q, beta) - self.records[*t as usize].potential).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub horizon: u64,
    pub seed: u64,
    pub approx: ApproxParams,
    pub audit: bool,
    pub snapshot_every: u64,
    pub snapshot_capacity: usize,
}

impl RunOptions {
    pub fn new(horizon: u64) -> Self {
        RunOptions {
            horizon,
            seed: 0,
            approx: ApproxParams::exact(),
            audit: false,
            snapshot_every: 1000,
            snapshot_capacity: 64,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn approx(mut self, approx: ApproxParams) -> Self {
        self.approx = approx;
        self
    }

    pub fn audit(mut self, on: bool) -> Self {
        self.audit = on;
        self
    }
}

/// Runs the slot loop from empty queues.
pub fn run(spec: &NetworkSpec, adversary: &mut dyn Adversary, opts: &RunOptions) -> Result<SimulationTrace> {
    run_from(spec, adversary, opts, QueueMatrix::zeros(spec))
}

/// Runs the slot loop: adversary, then service, then injections, then
/// absorption at destinations, one row logged per slot.
pub fn run_from(
    spec: &NetworkSpec,
    adversary: &mut dyn Adversary,
    opts: &RunOptions,
    mut q: QueueMatrix,
) -> Result<SimulationTrace> {
    if opts.horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    opts.approx.validate()?;
    if q.nodes() != spec.node_count() || q.dests() != spec.dest_count() {
        return Err(Error::InvalidParameter("initial queues do not match the network".into()));
    }
    q.pin_destinations(spec);
    let beta = spec.beta();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut trace = SimulationTrace {
        records: Vec::with_capacity(opts.horizon.min(1 << 24) as usize),
        initial_potential: potential(&q, beta),
        initial_max_queue: q.max(),
        halted: None,
        audit: Vec::new(),
        snapshots: VecDeque::new(),
        final_queues: q.clone(),
        injected: 0.0,
    };
    let mut last_rates: Option<Arc<RateSet>> = None;

    for t in 0..opts.horizon {
        let input = match adversary.step(t, &q)? {
            Step::Continue(input) => input,
            Step::Halt(reason) => {
                trace.halted = Some(reason);
                break;
            }
        };
        if !last_rates.as_ref().is_some_and(|r| Arc::ptr_eq(r, &input.rates)) {
            input.rates.validate(spec)?;
            last_rates = Some(input.rates.clone());
        }
        let dec = max_weight_approx(spec, &q, &input.rates, &opts.approx, &mut rng);
        let objective = dec.objective(spec, &q);
        let q_before = opts.audit.then(|| q.clone());
        let mut delivered = apply_decision(spec, &mut q, &dec)?;
        let q_after_service = opts.audit.then(|| q.clone());
        delivered += apply_injections(spec, &mut q, &input.injections)?;
        trace.injected += input.injections.iter().map(|e| e.size).sum::<f64>();

        trace.records.push(SlotRecord {
            slot: t,
            max_queue: q.max(),
            potential: potential(&q, beta),
            backlog: q.total(),
            objective,
            delivered,
        });
        if opts.audit {
            trace.audit.push(AuditSlot {
                slot: t,
                q_before: q_before.unwrap(),
                rates: input.rates,
                decision: dec,
                q_after_service: q_after_service.unwrap(),
                injections: input.injections,
            });
        }
        if opts.snapshot_every > 0 && t % opts.snapshot_every == 0 && opts.snapshot_capacity > 0 {
            if trace.snapshots.len() == opts.snapshot_capacity {
                trace.snapshots.pop_front();
            }
            trace.snapshots.push_back((t, q.clone()));
        }
    }
    trace.final_queues = q;
    Ok(trace)
}
