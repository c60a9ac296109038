#![allow(dead_code)]

use mwstab::model::{NetworkSpec, QueueMatrix, RateSet};
use rand::Rng;

pub const R_MIN: f64 = 0.5;
pub const R_MAX: f64 = 2.0;

/// Random directed network with `nodes` in [2, max_nodes] and at most
/// `max_edges` distinct directed edges, one or two destinations.
pub fn random_spec<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize) -> NetworkSpec {
    let n = rng.random_range(2..=max_nodes);
    let mut edges = Vec::new();
    let want = rng.random_range(1..=max_edges);
    for _ in 0..want * 4 {
        if edges.len() == want {
            break;
        }
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    let mut dests = vec![rng.random_range(0..n)];
    if rng.random_bool(0.5) {
        let d = rng.random_range(0..n);
        if d != dests[0] {
            dests.push(d);
        }
    }
    let beta = [1.0, 1.0, 1.5, 2.0][rng.random_range(0..4)];
    NetworkSpec::new(n, edges, dests, beta, R_MIN, R_MAX).unwrap()
}

pub fn random_queues<R: Rng>(rng: &mut R, spec: &NetworkSpec, hi: f64) -> QueueMatrix {
    let rows: Vec<Vec<f64>> = (0..spec.node_count())
        .map(|v| {
            spec.destinations()
                .iter()
                .map(|&d| if d == v { 0.0 } else { rng.random_range(0.0..hi) })
                .collect()
        })
        .collect();
    QueueMatrix::from_rows(spec, &rows).unwrap()
}

fn random_rate<R: Rng>(rng: &mut R) -> f64 {
    if rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(R_MIN..=R_MAX)
    }
}

pub fn random_explicit<R: Rng>(rng: &mut R, spec: &NetworkSpec, max_vectors: usize) -> RateSet {
    let m = rng.random_range(1..=max_vectors);
    RateSet::explicit(
        (0..m)
            .map(|_| (0..spec.edge_count()).map(|_| random_rate(rng)).collect())
            .collect(),
    )
}

pub fn random_matching<R: Rng>(rng: &mut R, spec: &NetworkSpec) -> RateSet {
    RateSet::matching((0..spec.edge_count()).map(|_| random_rate(rng)).collect())
}

/// Best single-edge weight at rate r, recomputed from scratch.
pub fn best_edge_weight(spec: &NetworkSpec, q: &QueueMatrix, e: usize, r: f64) -> f64 {
    let (v, u) = spec.edge(e);
    let b = spec.beta();
    let mut best = 0.0f64;
    for di in 0..spec.dest_count() {
        let (a, c) = (q.get(v, di), q.get(u, di));
        if a > c {
            best = best.max(r.min((a - c) / 2.0) * (a.powf(b) - c.powf(b)));
        }
    }
    best
}

fn vector_value(spec: &NetworkSpec, q: &QueueMatrix, r: &[f64]) -> f64 {
    (0..spec.edge_count()).map(|e| best_edge_weight(spec, q, e, r[e])).sum()
}

/// Maximum objective by exhaustive search: every listed vector, or every
/// node-disjoint set of directed edges at full cap.
pub fn brute_force_objective(spec: &NetworkSpec, q: &QueueMatrix, rs: &RateSet) -> f64 {
    match rs {
        RateSet::Explicit { vectors } => vectors.iter().map(|r| vector_value(spec, q, r)).fold(0.0, f64::max),
        RateSet::Matching { caps } => {
            let k = spec.edge_count();
            assert!(k <= 20, "too many edges to enumerate");
            let mut best = 0.0f64;
            'subsets: for mask in 0u32..(1 << k) {
                let mut used = vec![false; spec.node_count()];
                let mut r = vec![0.0; k];
                for e in 0..k {
                    if mask >> e & 1 == 1 {
                        if caps[e] == 0.0 {
                            continue 'subsets;
                        }
                        let (a, b) = spec.edge(e);
                        if used[a] || used[b] {
                            continue 'subsets;
                        }
                        used[a] = true;
                        used[b] = true;
                        r[e] = caps[e];
                    }
                }
                best = best.max(vector_value(spec, q, &r));
            }
            best
        }
    }
}

/// Explicit set whose vectors are random matchings, so each node has at
/// most one active edge per vector.
pub fn random_explicit_matchings<R: Rng>(rng: &mut R, spec: &NetworkSpec, max_vectors: usize) -> RateSet {
    let m = rng.random_range(1..=max_vectors);
    let vectors = (0..m)
        .map(|_| {
            let mut used = vec![false; spec.node_count()];
            (0..spec.edge_count())
                .map(|e| {
                    let (a, b) = spec.edge(e);
                    if used[a] || used[b] || rng.random_bool(0.3) {
                        0.0
                    } else {
                        used[a] = true;
                        used[b] = true;
                        rng.random_range(R_MIN..=R_MAX)
                    }
                })
                .collect()
        })
        .collect();
    RateSet::explicit(vectors)
}
