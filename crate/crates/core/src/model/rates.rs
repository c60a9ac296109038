use serde::{Deserialize, Serialize};

use super::network::NetworkSpec;
use super::queues::TOL;
use crate::error::{Error, Result};

/// One slot's feasible rate vectors, closed under componentwise reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSet {
    /// A finite list of rate vectors and everything below them.
    Explicit { vectors: Vec<Vec<f64>> },
    /// Node-exclusive interference: any set of directed edges no two of
    /// which share a node, each running at up to its cap. A zero cap
    /// disables the edge.
    Matching { caps: Vec<f64> },
}

impl RateSet {
    pub fn explicit(vectors: Vec<Vec<f64>>) -> Self {
        RateSet::Explicit { vectors }
    }

    pub fn matching(caps: Vec<f64>) -> Self {
        RateSet::Matching { caps }
    }

    /// Checks dimensions and that every nonzero component lies in
    /// [r_min, r_max].
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let k = spec.edge_count();
        let check = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != k {
                return Err(Error::InvalidRateSet(format!(
                    "{what} has length {}, expected {k}",
                    v.len()
                )));
            }
            for (e, &x) in v.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidRateSet(format!("{what}[{e}] = {x}")));
                }
                if x > 0.0 && (x < spec.r_min() - TOL || x > spec.r_max() + TOL) {
                    return Err(Error::InvalidRateSet(format!(
                        "{what}[{e}] = {x} outside [{}, {}]",
                        spec.r_min(),
                        spec.r_max()
                    )));
                }
            }
            Ok(())
        };
        match self {
            RateSet::Explicit { vectors } => {
                for (i, v) in vectors.iter().enumerate() {
                    check(v, &format!("vector {i}"))?;
                }
                Ok(())
            }
            RateSet::Matching { caps } => check(caps, "caps"),
        }
    }

    /// Downward-closed membership test.
    pub fn contains(&self, spec: &NetworkSpec, r: &[f64]) -> bool {
        let k = spec.edge_count();
        if r.len() != k || r.iter().any(|&x| !x.is_finite() || x < -TOL) {
            return false;
        }
        match self {
            RateSet::Explicit { vectors } => vectors
                .iter()
                .any(|w| w.len() == k && r.iter().zip(w).all(|(a, b)| *a <= b + TOL)),
            RateSet::Matching { caps } => {
                if caps.len() != k {
                    return false;
                }
                let mut busy = vec![false; spec.node_count()];
                for e in 0..k {
                    if r[e] <= TOL {
                        continue;
                    }
                    if r[e] > caps[e] + TOL {
                        return false;
                    }
                    let (u, v) = spec.edge(e);
                    if busy[u] || busy[v] {
                        return false;
                    }
                    busy[u] = true;
                    busy[v] = true;
                }
                true
            }
        }
    }
}

/// Lists the maximal vectors of a rate set: the explicit list as given, or
/// one full-cap vector per node-disjoint edge set (including the empty one).
pub fn enumerate_rate_vectors(
    spec: &NetworkSpec,
    rs: &RateSet,
    limit: usize,
) -> Result<Vec<Vec<f64>>> {
    match rs {
        RateSet::Explicit { vectors } => {
            if vectors.len() > limit {
                return Err(Error::EnumerationLimit { limit });
            }
            Ok(vectors.clone())
        }
        RateSet::Matching { caps } => {
            if caps.len() != spec.edge_count() {
                return Err(Error::InvalidRateSet("caps length mismatch".into()));
            }
            let mut out = Vec::new();
            let mut cur = vec![0.0; caps.len()];
            let mut busy = vec![false; spec.node_count()];
            enumerate_matchings(spec, caps, 0, &mut cur, &mut busy, &mut out, limit)?;
            Ok(out)
        }
    }
}

fn enumerate_matchings(
    spec: &NetworkSpec,
    caps: &[f64],
    e: usize,
    cur: &mut Vec<f64>,
    busy: &mut Vec<bool>,
    out: &mut Vec<Vec<f64>>,
    limit: usize,
) -> Result<()> {
    if e == caps.len() {
        if out.len() == limit {
            return Err(Error::EnumerationLimit { limit });
        }
        out.push(cur.clone());
        return Ok(());
    }
    enumerate_matchings(spec, caps, e + 1, cur, busy, out, limit)?;
    let (u, v) = spec.edge(e);
    if caps[e] > 0.0 && !busy[u] && !busy[v] {
        busy[u] = true;
        busy[v] = true;
        cur[e] = caps[e];
        enumerate_matchings(spec, caps, e + 1, cur, busy, out, limit)?;
        cur[e] = 0.0;
        busy[u] = false;
        busy[v] = false;
    }
    Ok(())
}
