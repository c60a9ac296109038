use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adversary, SlotInput, Step};
use crate::error::{Error, Result};
use crate::model::{InjectionEvent, NetworkSpec, QueueMatrix, RateSet};

/// Each slot draws one rate set and, independently per pair, one injection
/// size. Weights need not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidConfig {
    pub rate_sets: Vec<(RateSet, f64)>,
    pub pairs: Vec<(usize, usize)>,
    /// Per pair: (size, weight) outcomes. A size of zero means no injection.
    pub arrivals: Vec<Vec<(f64, f64)>>,
}

pub struct IidAdversary {
    rate_sets: Vec<Arc<RateSet>>,
    rate_pick: WeightedIndex<f64>,
    pairs: Vec<(usize, usize)>,
    sizes: Vec<Vec<f64>>,
    size_pick: Vec<WeightedIndex<f64>>,
    rng: ChaCha8Rng,
    next_id: u64,
    last_rate_set: usize,
}

fn weights(w: impl Iterator<Item = f64>) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(w).map_err(|e| Error::InvalidParameter(format!("bad weights: {e}")))
}

impl IidAdversary {
    pub fn new(spec: &NetworkSpec, config: &IidConfig, seed: u64) -> Result<Self> {
        for (rs, _) in &config.rate_sets {
            rs.validate(spec)?;
        }
        if config.arrivals.len() != config.pairs.len() {
            return Err(Error::InvalidParameter("one arrival law per pair required".into()));
        }
        for &(s, d) in &config.pairs {
            if s >= spec.node_count() || spec.dest_index(d).is_none() {
                return Err(Error::InvalidParameter(format!("bad pair ({s}, {d})")));
            }
        }
        for law in &config.arrivals {
            if law.iter().any(|(x, _)| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidParameter("arrival sizes must be nonnegative".into()));
            }
        }
        Ok(IidAdversary {
            rate_sets: config.rate_sets.iter().map(|(r, _)| Arc::new(r.clone())).collect(),
            rate_pick: weights(config.rate_sets.iter().map(|x| x.1))?,
            pairs: config.pairs.clone(),
            sizes: config.arrivals.iter().map(|l| l.iter().map(|x| x.0).collect()).collect(),
            size_pick: config
                .arrivals
                .iter()
                .map(|l| weights(l.iter().map(|x| x.1)))
                .collect::<Result<_>>()?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
            last_rate_set: 0,
        })
    }

    /// Index of the rate set drawn in the most recent slot.
    pub fn last_rate_set(&self) -> usize {
        self.last_rate_set
    }
}

impl Adversary for IidAdversary {
    fn step(&mut self, t: u64, _q: &QueueMatrix) -> Result<Step> {
        let k = self.rate_pick.sample(&mut self.rng);
        self.last_rate_set = k;
        let mut injections = Vec::new();
        for (m, &(s, d)) in self.pairs.iter().enumerate() {
            let size = self.sizes[m][self.size_pick[m].sample(&mut self.rng)];
            if size > 0.0 {
                injections.push(InjectionEvent {
                    packet_id: self.next_id,
                    slot: t,
                    node: s,
                    destination: d,
                    size,
                });
                self.next_id += 1;
            }
        }
        Ok(Step::Continue(SlotInput {
            rates: self.rate_sets[k].clone(),
            injections,
        }))
    }
}
