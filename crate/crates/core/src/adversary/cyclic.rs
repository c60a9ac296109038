use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{phase_index, Adversary, SlotInput, Step};
use crate::error::{Error, Result};
use crate::model::{InjectionEvent, NetworkSpec, QueueMatrix, RateSet};

/// Three edge-rate vectors, three arrival vectors over K source-destination
/// pairs, and the 3x3 table of load constants c[i][j].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseTraffic {
    pub pairs: Vec<(usize, usize)>,
    pub gammas: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl PhaseTraffic {
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.gammas.len() != 3 || self.rates.len() != 3 || self.c.len() != 3 {
            return bad("need exactly three gamma vectors, rate vectors and c rows".into());
        }
        for (m, &(s, d)) in self.pairs.iter().enumerate() {
            if s >= spec.node_count() || spec.dest_index(d).is_none() || s == d {
                return bad(format!("pair {m} ({s}, {d}) is not a valid source-destination pair"));
            }
        }
        for g in &self.gammas {
            if g.len() != self.pairs.len() || g.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return bad("each gamma needs one nonnegative entry per pair".into());
            }
        }
        for r in &self.rates {
            RateSet::matching(r.clone()).validate(spec)?;
        }
        for row in &self.c {
            if row.len() != 3 || row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return bad("c must be a 3x3 table of nonnegative numbers".into());
            }
        }
        Ok(())
    }
}

fn batch(pairs: &[(usize, usize)], sizes: impl Iterator<Item = f64>, t: u64, next_id: &mut u64) -> Vec<InjectionEvent> {
    let mut out = Vec::new();
    for (&(s, d), size) in pairs.iter().zip(sizes) {
        if size > 0.0 {
            out.push(InjectionEvent {
                packet_id: *next_id,
                slot: t,
                node: s,
                destination: d,
                size,
            });
            *next_id += 1;
        }
    }
    out
}

/// Reduced phase (0, 1 or 2) of engine slot `t`; engine slots count from 0.
fn reduced_phase(t: u64) -> Result<(u64, usize)> {
    let p = phase_index(t + 1)?;
    Ok((p, ((p - 1) % 3) as usize))
}

/// Fixed edge rates r^(i); arrivals c[i][j] gamma^(j) with j following the
/// phase index mod 3.
#[derive(Debug, Clone)]
pub struct CyclicArrival {
    traffic: PhaseTraffic,
    i: usize,
    rates: Arc<RateSet>,
    next_id: u64,
}

impl CyclicArrival {
    pub fn new(spec: &NetworkSpec, traffic: PhaseTraffic, i: usize) -> Result<Self> {
        traffic.validate(spec)?;
        if i >= 3 {
            return Err(Error::InvalidParameter(format!("rate vector index {i} not in 0..3")));
        }
        let rates = Arc::new(RateSet::matching(traffic.rates[i].clone()));
        Ok(CyclicArrival {
            traffic,
            i,
            rates,
            next_id: 0,
        })
    }

    /// (edge vector, arrival vector) indices in force at slot t.
    pub fn choice(&self, t: u64) -> Result<(usize, usize)> {
        Ok((self.i, reduced_phase(t)?.1))
    }
}

impl Adversary for CyclicArrival {
    fn step(&mut self, t: u64, _q: &QueueMatrix) -> Result<Step> {
        let (_, j) = self.choice(t)?;
        let c = self.traffic.c[self.i][j];
        let sizes = self.traffic.gammas[j].iter().map(|g| c * g);
        let injections = batch(&self.traffic.pairs, sizes, t, &mut self.next_id);
        Ok(Step::Continue(SlotInput {
            rates: self.rates.clone(),
            injections,
        }))
    }
}

/// Edge rates r^(i) with i following the phase index mod 3; in every phase
/// an arrival vector gamma^(j) is drawn at random, loaded by c[i][j].
#[derive(Debug, Clone)]
pub struct CyclicEdgeAndArrival {
    traffic: PhaseTraffic,
    rates: [Arc<RateSet>; 3],
    seed: u64,
    cached: Option<(u64, usize)>,
    next_id: u64,
}

impl CyclicEdgeAndArrival {
    pub fn new(spec: &NetworkSpec, traffic: PhaseTraffic, seed: u64) -> Result<Self> {
        traffic.validate(spec)?;
        let rates = [0, 1, 2].map(|i| Arc::new(RateSet::matching(traffic.rates[i].clone())));
        Ok(CyclicEdgeAndArrival {
            traffic,
            rates,
            seed,
            cached: None,
            next_id: 0,
        })
    }

    fn arrival_for_phase(&self, phase: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(phase);
        rng.random_range(0..3)
    }

    pub fn choice(&self, t: u64) -> Result<(usize, usize)> {
        let (p, i) = reduced_phase(t)?;
        Ok((i, self.arrival_for_phase(p)))
    }
}

impl Adversary for CyclicEdgeAndArrival {
    fn step(&mut self, t: u64, _q: &QueueMatrix) -> Result<Step> {
        let (p, i) = reduced_phase(t)?;
        let j = match self.cached {
            Some((cp, j)) if cp == p => j,
            _ => {
                let j = self.arrival_for_phase(p);
                self.cached = Some((p, j));
                j
            }
        };
        let c = self.traffic.c[i][j];
        let sizes = self.traffic.gammas[j].iter().map(|g| c * g);
        let injections = batch(&self.traffic.pairs, sizes, t, &mut self.next_id);
        Ok(Step::Continue(SlotInput {
            rates: self.rates[i].clone(),
            injections,
        }))
    }
}

/// Constant rate set and constant per-pair injections.
#[derive(Debug, Clone)]
pub struct FixedLoad {
    rates: Arc<RateSet>,
    pairs: Vec<(usize, usize)>,
    sizes: Vec<f64>,
    next_id: u64,
}

impl FixedLoad {
    pub fn new(rates: RateSet, pairs: Vec<(usize, usize)>, sizes: Vec<f64>) -> Result<Self> {
        if pairs.len() != sizes.len() {
            return Err(Error::InvalidParameter("one size per pair required".into()));
        }
        Ok(FixedLoad {
            rates: Arc::new(rates),
            pairs,
            sizes,
            next_id: 0,
        })
    }
}

impl Adversary for FixedLoad {
    fn step(&mut self, t: u64, _q: &QueueMatrix) -> Result<Step> {
        let injections = batch(&self.pairs, self.sizes.iter().copied(), t, &mut self.next_id);
        Ok(Step::Continue(SlotInput {
            rates: self.rates.clone(),
            injections,
        }))
    }
}
