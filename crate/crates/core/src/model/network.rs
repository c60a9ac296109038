use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static problem instance: topology, destination set, potential exponent
/// and the rate bounds every adversary must respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct NetworkSpec {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    destinations: Vec<usize>,
    beta: f64,
    r_min: f64,
    r_max: f64,
    dest_slot: Vec<Option<usize>>,
    links: Vec<Link>,
    edge_link: Vec<usize>,
}

/// An undirected pair of nodes together with the directed edges between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    destinations: Vec<usize>,
    #[serde(default = "default_beta")]
    beta: f64,
    r_min: f64,
    r_max: f64,
}

fn default_beta() -> f64 {
    1.0
}

impl TryFrom<RawNetwork> for NetworkSpec {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        NetworkSpec::new(
            raw.node_count,
            raw.edges,
            raw.destinations,
            raw.beta,
            raw.r_min,
            raw.r_max,
        )
    }
}

impl From<NetworkSpec> for RawNetwork {
    fn from(spec: NetworkSpec) -> Self {
        RawNetwork {
            node_count: spec.node_count,
            edges: spec.edges,
            destinations: spec.destinations,
            beta: spec.beta,
            r_min: spec.r_min,
            r_max: spec.r_max,
        }
    }
}

impl NetworkSpec {
    pub fn new(
        node_count: usize,
        edges: Vec<(usize, usize)>,
        destinations: Vec<usize>,
        beta: f64,
        r_min: f64,
        r_max: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        if node_count == 0 {
            return bad("node_count must be positive".into());
        }
        if !(beta.is_finite() && beta > 0.0) {
            return bad(format!("beta must be positive, got {beta}"));
        }
        if !(r_min.is_finite() && r_min > 0.0) {
            return bad(format!("r_min must be positive, got {r_min}"));
        }
        if !(r_max.is_finite() && r_max >= r_min) {
            return bad(format!("r_max ({r_max}) must be at least r_min ({r_min})"));
        }

        let mut seen = std::collections::HashSet::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= node_count || v >= node_count {
                return bad(format!("edge {i} ({u}, {v}) references a missing node"));
            }
            if u == v {
                return bad(format!("edge {i} is a self-loop at node {u}"));
            }
            if !seen.insert((u, v)) {
                return bad(format!("edge {i} ({u}, {v}) is a duplicate"));
            }
        }

        let mut dest_slot = vec![None; node_count];
        for (i, &d) in destinations.iter().enumerate() {
            if d >= node_count {
                return bad(format!("destination {d} is not a node"));
            }
            if dest_slot[d].is_some() {
                return bad(format!("destination {d} listed twice"));
            }
            dest_slot[d] = Some(i);
        }

        let mut links: Vec<Link> = Vec::new();
        let mut by_pair = std::collections::HashMap::new();
        let mut edge_link = Vec::with_capacity(edges.len());
        for (i, &(u, v)) in edges.iter().enumerate() {
            let key = (u.min(v), u.max(v));
            let idx = *by_pair.entry(key).or_insert_with(|| {
                links.push(Link {
                    a: key.0,
                    b: key.1,
                    edges: Vec::new(),
                });
                links.len() - 1
            });
            links[idx].edges.push(i);
            edge_link.push(idx);
        }

        Ok(NetworkSpec {
            node_count,
            edges,
            destinations,
            beta,
            r_min,
            r_max,
            dest_slot,
            links,
            edge_link,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn destinations(&self) -> &[usize] {
        &self.destinations
    }

    pub fn dest_count(&self) -> usize {
        self.destinations.len()
    }

    /// Column of `node` in a queue matrix, if it is a destination.
    pub fn dest_index(&self, node: usize) -> Option<usize> {
        self.dest_slot.get(node).copied().flatten()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Undirected support of the edge list, in order of first appearance.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_of(&self, e: usize) -> usize {
        self.edge_link[e]
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        NetworkSpec::new(
            self.node_count,
            self.edges.clone(),
            self.destinations.clone(),
            beta,
            self.r_min,
            self.r_max,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loop_and_duplicates() {
        assert!(NetworkSpec::new(2, vec![(0, 0)], vec![1], 1.0, 1.0, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![(0, 1), (0, 1)], vec![1], 1.0, 1.0, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![(0, 1), (1, 0)], vec![1], 1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(NetworkSpec::new(2, vec![(0, 1)], vec![1], 1.0, 0.0, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![(0, 1)], vec![1], 1.0, 2.0, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![(0, 1)], vec![1], 0.0, 1.0, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![(0, 1)], vec![5], 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn links_group_both_directions() {
        let spec =
            NetworkSpec::new(3, vec![(0, 1), (1, 2), (1, 0)], vec![2], 1.0, 0.5, 2.0).unwrap();
        assert_eq!(spec.links().len(), 2);
        assert_eq!(spec.links()[0].edges, vec![0, 2]);
        assert_eq!(spec.link_of(2), 0);
        assert_eq!(spec.dest_index(2), Some(0));
        assert_eq!(spec.dest_index(0), None);
    }

    #[test]
    fn serde_roundtrip_revalidates() {
        let spec = NetworkSpec::new(2, vec![(0, 1)], vec![1], 1.0, 0.5, 2.0).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: NetworkSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let broken = json.replace("\"r_min\":0.5", "\"r_min\":-1.0");
        assert!(serde_json::from_str::<NetworkSpec>(&broken).is_err());
    }
}
