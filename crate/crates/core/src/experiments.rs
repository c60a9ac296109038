//! The n1 x n2 grid setup: random source-destination pairs, three
//! edge-rate vectors with a few links switched off each, three arrival
//! vectors, and the 3x3 table of load constants found by probing.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, CyclicArrival, CyclicEdgeAndArrival, FixedLoad, PhaseTraffic};
use crate::engine::{binary_search_c, run, ProbeConfig, ProbeResult, RunOptions, SimulationTrace};
use crate::error::{Error, Result};
use crate::model::{NetworkSpec, RateSet};

/// Links of an n1 x n2 grid, node (r, c) = r * n2 + c: first the horizontal
/// links row by row, then the vertical ones.
pub fn grid_links(n1: usize, n2: usize) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    for r in 0..n1 {
        for c in 0..n2.saturating_sub(1) {
            links.push((r * n2 + c, r * n2 + c + 1));
        }
    }
    for r in 0..n1.saturating_sub(1) {
        for c in 0..n2 {
            links.push((r * n2 + c, (r + 1) * n2 + c));
        }
    }
    links
}

/// Grid network with both directions of every link; edges 2l and 2l+1
/// are the two directions of link l.
pub fn grid_network(n1: usize, n2: usize, destinations: Vec<usize>, beta: f64, r_min: f64, r_max: f64) -> Result<NetworkSpec> {
    let edges = grid_links(n1, n2).into_iter().flat_map(|(a, b)| [(a, b), (b, a)]).collect();
    NetworkSpec::new(n1 * n2, edges, destinations, beta, r_min, r_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    pub n1: usize,
    pub n2: usize,
    /// Number of source-destination pairs.
    pub k: usize,
    /// Links switched off in each edge-rate vector.
    pub removed_per_vector: usize,
    pub cap_range: (f64, f64),
    pub gamma_range: (f64, f64),
    pub beta: f64,
    pub seed: u64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            n1: 3,
            n2: 4,
            k: 10,
            removed_per_vector: 3,
            cap_range: (0.5, 2.0),
            gamma_range: (0.5, 2.0),
            beta: 1.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExperiment {
    pub spec: NetworkSpec,
    /// Constants are zero until filled from a probe table.
    pub traffic: PhaseTraffic,
    /// Links removed from each edge-rate vector.
    pub removed: Vec<Vec<usize>>,
}

fn connected(n: usize, links: &[(usize, usize)], skip: &BTreeSet<usize>) -> bool {
    let mut adj = vec![Vec::new(); n];
    for (l, &(a, b)) in links.iter().enumerate() {
        if !skip.contains(&l) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Draws pairs, rate vectors and arrival vectors from `p.seed`.
pub fn generate_grid_experiment(p: &GridParams) -> Result<GridExperiment> {
    let n = p.n1 * p.n2;
    if n < 2 || p.k == 0 || p.k > n * (n - 1) {
        return Err(Error::InvalidParameter("grid too small for the requested pairs".into()));
    }
    let links = grid_links(p.n1, p.n2);
    if p.removed_per_vector >= links.len() {
        return Err(Error::InvalidParameter("cannot remove every link".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let mut pairs = Vec::new();
    let mut seen = BTreeSet::new();
    while pairs.len() < p.k {
        let s = rng.random_range(0..n);
        let d = rng.random_range(0..n);
        if s != d && seen.insert((s, d)) {
            pairs.push((s, d));
        }
    }
    let dests: Vec<usize> = pairs.iter().map(|&(_, d)| d).collect::<BTreeSet<_>>().into_iter().collect();
    let spec = grid_network(p.n1, p.n2, dests, p.beta, p.cap_range.0, p.cap_range.1)?;

    let mut rates = Vec::new();
    let mut removed = Vec::new();
    for _ in 0..3 {
        let off = (0..1000)
            .map(|_| sample(&mut rng, links.len(), p.removed_per_vector).into_iter().collect::<BTreeSet<_>>())
            .find(|off| connected(n, &links, off))
            .ok_or_else(|| Error::InvalidParameter("no connected removal found".into()))?;
        let mut r = Vec::with_capacity(2 * links.len());
        for l in 0..links.len() {
            let cap = rng.random_range(p.cap_range.0..=p.cap_range.1);
            let cap = if off.contains(&l) { 0.0 } else { cap };
            r.extend([cap, cap]);
        }
        rates.push(r);
        removed.push(off.into_iter().collect());
    }
    let gammas = (0..3)
        .map(|_| (0..p.k).map(|_| rng.random_range(p.gamma_range.0..=p.gamma_range.1)).collect())
        .collect();
    let traffic = PhaseTraffic {
        pairs,
        gammas,
        rates,
        c: vec![vec![0.0; 3]; 3],
    };
    traffic.validate(&spec)?;
    Ok(GridExperiment { spec, traffic, removed })
}

/// Probes c[i][j] for every (edge vector, arrival vector) pair, in parallel.
pub fn probe_table(exp: &GridExperiment, cfg: &ProbeConfig) -> Result<Vec<Vec<ProbeResult>>> {
    let cells: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
    let results: Vec<Result<ProbeResult>> = cells
        .par_iter()
        .map(|&(i, j)| {
            binary_search_c(
                &exp.spec,
                &RateSet::matching(exp.traffic.rates[i].clone()),
                &exp.traffic.pairs,
                &exp.traffic.gammas[j],
                cfg,
            )
        })
        .collect();
    let mut flat = results.into_iter();
    let mut table = Vec::new();
    for _ in 0..3 {
        table.push(flat.by_ref().take(3).collect::<Result<Vec<_>>>()?);
    }
    Ok(table)
}

/// Copies the probed constants into the traffic description.
pub fn with_constants(exp: &GridExperiment, table: &[Vec<ProbeResult>]) -> GridExperiment {
    let mut out = exp.clone();
    out.traffic.c = table.iter().map(|row| row.iter().map(|r| r.c).collect()).collect();
    out
}

/// Experiment 1: fixed edge vector i, arrivals cycling with the phases.
pub fn experiment_one(exp: &GridExperiment, i: usize) -> Result<CyclicArrival> {
    CyclicArrival::new(&exp.spec, exp.traffic.clone(), i)
}

/// Experiment 2: edge vectors cycling with the phases, arrivals drawn per phase.
pub fn experiment_two(exp: &GridExperiment, seed: u64) -> Result<CyclicEdgeAndArrival> {
    CyclicEdgeAndArrival::new(&exp.spec, exp.traffic.clone(), seed)
}

/// Fixed edge vector i with the constant arrival vector c[i][j] gamma^(j).
pub fn fixed_vector(exp: &GridExperiment, i: usize, j: usize) -> Result<FixedLoad> {
    let c = exp.traffic.c[i][j];
    FixedLoad::new(
        RateSet::matching(exp.traffic.rates[i].clone()),
        exp.traffic.pairs.clone(),
        exp.traffic.gammas[j].iter().map(|g| c * g).collect(),
    )
}

/// Runs several adversaries over the same network concurrently.
pub fn run_many(
    spec: &NetworkSpec,
    adversaries: Vec<Box<dyn Adversary>>,
    opts: &RunOptions,
) -> Result<Vec<SimulationTrace>> {
    adversaries
        .into_par_iter()
        .map(|mut a| run(spec, &mut *a, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grid_shape() {
        assert_eq!(grid_links(3, 4).len(), 17);
        let spec = grid_network(3, 4, vec![11], 1.0, 0.5, 2.0).unwrap();
        assert_eq!(spec.edge_count(), 34);
        assert_eq!(spec.edge(0), (0, 1));
        assert_eq!(spec.edge(1), (1, 0));
    }

    #[test]
    fn generated_experiment_is_valid_and_seeded() {
        let p = GridParams::default();
        let a = generate_grid_experiment(&p).unwrap();
        let b = generate_grid_experiment(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.traffic.pairs.len(), 10);
        let links = grid_links(3, 4);
        for (i, off) in a.removed.iter().enumerate() {
            assert_eq!(off.len(), 3);
            assert!(connected(12, &links, &off.iter().copied().collect()));
            for &l in off {
                assert_eq!(a.traffic.rates[i][2 * l], 0.0);
            }
            let on = a.traffic.rates[i].iter().filter(|&&r| r > 0.0).count();
            assert_eq!(on, 2 * (17 - 3));
        }
        for &(s, d) in &a.traffic.pairs {
            assert!(a.spec.dest_index(d).is_some() && s != d);
        }
        let other = generate_grid_experiment(&GridParams { seed: 2, ..p }).unwrap();
        assert_ne!(a.traffic.pairs, other.traffic.pairs);
    }
}
