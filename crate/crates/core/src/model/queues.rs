use serde::{Deserialize, Serialize};

use super::network::NetworkSpec;
use crate::error::{Error, Result};

/// Absolute tolerance for all floating-point comparisons in the model.
pub const TOL: f64 = 1e-9;

/// Fluid backlog q[v][d], stored row-major with one column per destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueMatrix {
    nodes: usize,
    dests: usize,
    data: Vec<f64>,
}

impl QueueMatrix {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self::with_shape(spec.node_count(), spec.dest_count())
    }

    pub fn with_shape(nodes: usize, dests: usize) -> Self {
        QueueMatrix {
            nodes,
            dests,
            data: vec![0.0; nodes * dests],
        }
    }

    /// Builds a matrix from row data, rejecting negative or non-finite
    /// entries, and pins every destination's own queue to zero.
    pub fn from_rows(spec: &NetworkSpec, rows: &[Vec<f64>]) -> Result<Self> {
        let mut q = Self::zeros(spec);
        if rows.len() != spec.node_count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} queue rows, got {}",
                spec.node_count(),
                rows.len()
            )));
        }
        for (v, row) in rows.iter().enumerate() {
            if row.len() != spec.dest_count() {
                return Err(Error::InvalidParameter(format!(
                    "row {v} has {} entries, expected {}",
                    row.len(),
                    spec.dest_count()
                )));
            }
            for (di, &x) in row.iter().enumerate() {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "queue ({v}, #{di}) = {x} is not a nonnegative number"
                    )));
                }
                q.set(v, di, x);
            }
        }
        q.pin_destinations(spec);
        Ok(q)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dests(&self) -> usize {
        self.dests
    }

    #[inline]
    pub fn get(&self, v: usize, di: usize) -> f64 {
        self.data[v * self.dests + di]
    }

    #[inline]
    pub fn set(&mut self, v: usize, di: usize, x: f64) {
        self.data[v * self.dests + di] = x;
    }

    #[inline]
    pub fn add(&mut self, v: usize, di: usize, x: f64) {
        self.data[v * self.dests + di] += x;
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.dests..(v + 1) * self.dests]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Zeroes q[d][d] for every destination and returns the removed mass.
    pub fn pin_destinations(&mut self, spec: &NetworkSpec) -> f64 {
        let mut removed = 0.0;
        for (di, &d) in spec.destinations().iter().enumerate() {
            removed += self.get(d, di);
            self.set(d, di, 0.0);
        }
        removed
    }

    pub fn potential(&self, beta: f64) -> f64 {
        potential(self, beta)
    }
}

#[inline]
pub(crate) fn pow_beta(x: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        x
    } else if x <= 0.0 {
        0.0
    } else {
        x.powf(beta)
    }
}

/// P = sum over all queues of q^(beta+1).
pub fn potential(q: &QueueMatrix, beta: f64) -> f64 {
    if beta == 1.0 {
        q.data.iter().map(|x| x * x).sum()
    } else {
        q.data.iter().map(|&x| pow_beta(x, beta + 1.0)).sum()
    }
}

/// A packet (or one slot's batched fluid for a source-destination pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionEvent {
    pub packet_id: u64,
    pub slot: u64,
    pub node: usize,
    /// Destination node id, not a column index.
    pub destination: usize,
    pub size: f64,
}

/// The scheduler's choice for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    /// Rate vector drawn from the slot's rate set.
    pub rates: Vec<f64>,
    /// Destination column served on each edge, if any.
    pub dest: Vec<Option<usize>>,
    /// Amount moved on each edge.
    pub transfer: Vec<f64>,
}

impl ScheduleDecision {
    pub fn zero(k: usize) -> Self {
        ScheduleDecision {
            rates: vec![0.0; k],
            dest: vec![None; k],
            transfer: vec![0.0; k],
        }
    }

    /// Sum over edges of s_e (q_v^beta - q_u^beta) for the chosen commodity.
    pub fn objective(&self, spec: &NetworkSpec, q: &QueueMatrix) -> f64 {
        let beta = spec.beta();
        let mut total = 0.0;
        for (e, &s) in self.transfer.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            if let Some(di) = self.dest[e] {
                let (v, u) = spec.edge(e);
                total += s * (pow_beta(q.get(v, di), beta) - pow_beta(q.get(u, di), beta));
            }
        }
        total
    }

    /// Checks s_e = min(r_e, |dq|/2) and downhill movement on every active
    /// edge. Approximate decisions satisfy this too because they lower r_e
    /// alongside s_e.
    pub fn check(&self, spec: &NetworkSpec, q: &QueueMatrix) -> Result<()> {
        self.check_shape(spec)?;
        for e in 0..spec.edge_count() {
            let s = self.transfer[e];
            let Some(di) = self.dest[e] else {
                if s > 0.0 {
                    return Err(decision_err(e, "transfer without a destination"));
                }
                continue;
            };
            let (v, u) = spec.edge(e);
            let diff = q.get(v, di) - q.get(u, di);
            let expect = self.rates[e].min(diff.abs() / 2.0);
            if (s - expect).abs() > TOL * (1.0 + expect) {
                return Err(decision_err(e, &format!("s_e = {s}, expected {expect}")));
            }
            if s > 0.0 && diff < -TOL {
                return Err(decision_err(e, "moves data uphill"));
            }
        }
        Ok(())
    }

    fn check_shape(&self, spec: &NetworkSpec) -> Result<()> {
        let k = spec.edge_count();
        if self.rates.len() != k || self.dest.len() != k || self.transfer.len() != k {
            return Err(Error::InvalidDecision {
                edge: 0,
                reason: format!("decision vectors must have length {k}"),
            });
        }
        Ok(())
    }
}

fn decision_err(edge: usize, reason: &str) -> Error {
    Error::InvalidDecision {
        edge,
        reason: reason.to_string(),
    }
}

/// Applies all transfers of `dec` simultaneously against the pre-slot
/// queues, then removes everything sitting at its destination. Returns the
/// delivered mass.
pub fn apply_decision(spec: &NetworkSpec, q: &mut QueueMatrix, dec: &ScheduleDecision) -> Result<f64> {
    dec.check_shape(spec)?;
    let mut delta = vec![0.0; q.data.len()];
    for e in 0..spec.edge_count() {
        let s = dec.transfer[e];
        if !(s.is_finite() && s >= 0.0) {
            return Err(decision_err(e, &format!("transfer {s} is not a nonnegative number")));
        }
        if s == 0.0 {
            continue;
        }
        let Some(di) = dec.dest[e] else {
            return Err(decision_err(e, "transfer without a destination"));
        };
        if di >= q.dests {
            return Err(decision_err(e, "destination column out of range"));
        }
        if s > dec.rates[e] + TOL {
            return Err(decision_err(e, &format!("transfer {s} exceeds rate {}", dec.rates[e])));
        }
        let (v, u) = spec.edge(e);
        let diff = q.get(v, di) - q.get(u, di);
        if s > diff / 2.0 + TOL {
            return Err(decision_err(e, &format!("transfer {s} exceeds half the differential {diff}")));
        }
        delta[v * q.dests + di] -= s;
        delta[u * q.dests + di] += s;
    }
    for (i, d) in delta.iter().enumerate() {
        let x = q.data[i] + d;
        if x < -TOL {
            return Err(Error::NegativeQueue {
                node: i / q.dests,
                dest: i % q.dests,
                value: x,
            });
        }
    }
    for (x, d) in q.data.iter_mut().zip(&delta) {
        *x = (*x + d).max(0.0);
    }
    Ok(q.pin_destinations(spec))
}

/// Adds injected fluid after service. Injections addressed to their own
/// node are absorbed at once. Returns the absorbed mass.
pub fn apply_injections(
    spec: &NetworkSpec,
    q: &mut QueueMatrix,
    events: &[InjectionEvent],
) -> Result<f64> {
    let mut absorbed = 0.0;
    for ev in events {
        let di = validate_injection(spec, ev)?;
        if ev.node == ev.destination {
            absorbed += ev.size;
        } else {
            q.add(ev.node, di, ev.size);
        }
    }
    Ok(absorbed)
}

pub(crate) fn validate_injection(spec: &NetworkSpec, ev: &InjectionEvent) -> Result<usize> {
    let fail = |reason: String| Error::InvalidInjection {
        packet_id: ev.packet_id,
        reason,
    };
    if !(ev.size.is_finite() && ev.size > 0.0) {
        return Err(fail(format!("size {} must be positive", ev.size)));
    }
    if ev.node >= spec.node_count() {
        return Err(fail(format!("source node {} does not exist", ev.node)));
    }
    spec.dest_index(ev.destination)
        .ok_or_else(|| fail(format!("{} is not a destination", ev.destination)))
}
