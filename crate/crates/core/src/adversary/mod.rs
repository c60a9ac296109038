//! Traffic and interference generators driven slot by slot.

mod cyclic;
mod exponential;
mod iid;
mod witness;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InjectionEvent, QueueMatrix, RateSet};

pub use cyclic::{CyclicArrival, CyclicEdgeAndArrival, FixedLoad, PhaseTraffic};
pub use exponential::{exponential_network, exponential_step, ExponentialAdversary, ExponentialMove};
pub use iid::{IidAdversary, IidConfig};
pub use witness::{
    check_witness_compliance, random_witness_scenario, ComplianceReport, ScenarioParams,
    WitnessMove, WitnessSchedule, WitnessScenario,
};

/// What the adversary hands the engine for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotInput {
    pub rates: Arc<RateSet>,
    pub injections: Vec<InjectionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Continue(SlotInput),
    /// Stop the run; the string says why.
    Halt(String),
}

/// A per-slot source of rate sets and injections. Adversaries may look at
/// the queues as they stand at the start of the slot.
pub trait Adversary: Send {
    fn step(&mut self, t: u64, q: &QueueMatrix) -> Result<Step>;
}

impl<A: Adversary + ?Sized> Adversary for Box<A> {
    fn step(&mut self, t: u64, q: &QueueMatrix) -> Result<Step> {
        (**self).step(t, q)
    }
}

/// Window length and slack of an (omega, eps) adversary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryParams {
    pub omega: u64,
    pub eps: f64,
}

impl AdversaryParams {
    pub fn new(omega: u64, eps: f64) -> Result<Self> {
        let p = AdversaryParams { omega, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega == 0 {
            return Err(Error::InvalidParameter("omega must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {} not in (0, 1)", self.eps)));
        }
        Ok(())
    }

    pub fn window_of(&self, t: u64) -> u64 {
        t / self.omega
    }

    pub fn window_slots(&self, j: u64) -> std::ops::Range<u64> {
        j * self.omega..(j + 1) * self.omega
    }
}

/// Last slot of each phase: ceil(1.5 + 1.5^2 + ... + 1.5^i), i = 1, 2, ...
fn phase_ends() -> &'static [u64] {
    static ENDS: OnceLock<Vec<u64>> = OnceLock::new();
    ENDS.get_or_init(|| {
        let mut ends = Vec::new();
        for i in 1u32.. {
            // sum_{j=1..i} 3^j 2^(i-j), over 2^i
            let mut num: u128 = 0;
            let mut ok = true;
            for j in 1..=i {
                let term = 3u128
                    .checked_pow(j)
                    .and_then(|a| a.checked_mul(1u128 << (i - j)));
                match term.and_then(|t| num.checked_add(t)) {
                    Some(x) => num = x,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                break;
            }
            let den = 1u128 << i;
            let end = num.div_ceil(den);
            if end > u64::MAX as u128 {
                break;
            }
            ends.push(end as u64);
        }
        ends
    })
}

/// Phase containing slot `t` (slots count from 1). Phase 1 is [1, 2],
/// phase 2 is [3, 4], phase 3 is [5, 8], and phase i ends at
/// ceil(sum_{j=1..i} 1.5^j).
pub fn phase_index(t: u64) -> Result<u64> {
    if t < 1 {
        return Err(Error::InvalidParameter("phase_index needs t >= 1".into()));
    }
    let ends = phase_ends();
    let i = ends.partition_point(|&end| end < t);
    if i == ends.len() {
        return Err(Error::InvalidParameter(format!("slot {t} beyond the phase table")));
    }
    Ok(i as u64 + 1)
}

/// First and last slot of phase `i`.
pub fn phase_bounds(i: u64) -> Result<(u64, u64)> {
    let ends = phase_ends();
    if i < 1 || i as usize > ends.len() {
        return Err(Error::InvalidParameter(format!("no phase {i}")));
    }
    let start = if i == 1 { 1 } else { ends[i as usize - 2] + 1 };
    Ok((start, ends[i as usize - 1]))
}

/// Replays a fixed list of slot inputs, then halts.
#[derive(Debug, Clone)]
pub struct Scripted {
    slots: Vec<SlotInput>,
}

impl Scripted {
    pub fn new(slots: Vec<SlotInput>) -> Self {
        Scripted { slots }
    }
}

impl Adversary for Scripted {
    fn step(&mut self, t: u64, _q: &QueueMatrix) -> Result<Step> {
        Ok(match self.slots.get(t as usize) {
            Some(s) => Step::Continue(s.clone()),
            None => Step::Halt("script exhausted".into()),
        })
    }
}

/// The same rate set every slot and nothing injected.
#[derive(Debug, Clone)]
pub struct ZeroInjection {
    rates: Arc<RateSet>,
}

impl ZeroInjection {
    pub fn new(rates: RateSet) -> Self {
        ZeroInjection {
            rates: Arc::new(rates),
        }
    }
}

impl Adversary for ZeroInjection {
    fn step(&mut self, _t: u64, _q: &QueueMatrix) -> Result<Step> {
        Ok(Step::Continue(SlotInput {
            rates: self.rates.clone(),
            injections: Vec::new(),
        }))
    }
}
