use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AdversaryParams, SlotInput};
use crate::model::{InjectionEvent, NetworkSpec, RateSet, TOL};

/// ell(p, e, t'): how much of packet p the witness moves over edge e in slot t'.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessMove {
    pub packet_id: u64,
    pub edge: usize,
    pub slot: u64,
    pub amount: f64,
}

/// An adversary's certificate: its own routing plus the rate vector it
/// uses in each slot. Slots without an entry use the zero vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WitnessSchedule {
    pub moves: Vec<WitnessMove>,
    pub rate_vectors: BTreeMap<u64, Vec<f64>>,
}

impl WitnessSchedule {
    pub fn rate(&self, t: u64, e: usize) -> f64 {
        self.rate_vectors.get(&t).map_or(0.0, |r| r[e])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub passed: bool,
    pub violation: Option<String>,
    pub packets: usize,
    pub moves: usize,
}

fn scaled_tol(x: f64) -> f64 {
    TOL * (1.0 + x.abs())
}

/// Checks a witness against the (omega, eps) conditions: per-packet
/// delivery of at least (1 - eps/2) of its size within its window, flow
/// conservation, the per-window capacity bound, and feasibility of every
/// witness rate vector. `rates[t]` is the rate set of slot t.
pub fn check_witness_compliance(
    spec: &NetworkSpec,
    ws: &WitnessSchedule,
    events: &[InjectionEvent],
    rates: &[Arc<RateSet>],
    ap: &AdversaryParams,
) -> ComplianceReport {
    let fail = |msg: String| ComplianceReport {
        passed: false,
        violation: Some(msg),
        packets: events.len(),
        moves: ws.moves.len(),
    };
    let k = spec.edge_count();

    let mut by_id: HashMap<u64, &InjectionEvent> = HashMap::new();
    for ev in events {
        if by_id.insert(ev.packet_id, ev).is_some() {
            return fail(format!("packet id {} used twice", ev.packet_id));
        }
    }

    for (&t, r) in &ws.rate_vectors {
        let Some(rs) = rates.get(t as usize) else {
            return fail(format!("witness uses slot {t}, which has no rate set"));
        };
        if !rs.contains(spec, r) {
            return fail(format!("witness rate vector at slot {t} is not feasible"));
        }
    }

    let mut per_packet: HashMap<u64, Vec<&WitnessMove>> = HashMap::new();
    let mut per_window: HashMap<(u64, usize), f64> = HashMap::new();
    for mv in &ws.moves {
        let Some(ev) = by_id.get(&mv.packet_id) else {
            return fail(format!("move for unknown packet {}", mv.packet_id));
        };
        if mv.edge >= k {
            return fail(format!("packet {} moves on missing edge {}", mv.packet_id, mv.edge));
        }
        if !(mv.amount.is_finite() && mv.amount >= 0.0) {
            return fail(format!("packet {} has a bad move amount {}", mv.packet_id, mv.amount));
        }
        if mv.slot < ev.slot || mv.slot >= ev.slot + ap.omega {
            return fail(format!(
                "packet {} moves at slot {}, outside [{}, {}]",
                mv.packet_id,
                mv.slot,
                ev.slot,
                ev.slot + ap.omega - 1
            ));
        }
        per_packet.entry(mv.packet_id).or_default().push(mv);
        *per_window.entry((ap.window_of(mv.slot), mv.edge)).or_default() += mv.amount;
    }

    for ev in events {
        let need = (1.0 - ap.eps / 2.0) * ev.size;
        if ev.node == ev.destination {
            continue;
        }
        let Some(moves) = per_packet.get_mut(&ev.packet_id) else {
            return fail(format!("packet {} has no witness moves", ev.packet_id));
        };
        moves.sort_by_key(|m| m.slot);
        let mut hold = vec![0.0; spec.node_count()];
        hold[ev.node] = ev.size;
        let mut i = 0;
        while i < moves.len() {
            let slot = moves[i].slot;
            let mut j = i;
            let mut out = vec![0.0; spec.node_count()];
            while j < moves.len() && moves[j].slot == slot {
                out[spec.edge(moves[j].edge).0] += moves[j].amount;
                j += 1;
            }
            for v in 0..spec.node_count() {
                if out[v] > hold[v] + scaled_tol(hold[v]) {
                    return fail(format!(
                        "packet {} sends {} from node {v} at slot {slot} but holds {}",
                        ev.packet_id, out[v], hold[v]
                    ));
                }
            }
            for m in &moves[i..j] {
                let (a, b) = spec.edge(m.edge);
                hold[a] -= m.amount;
                hold[b] += m.amount;
            }
            i = j;
        }
        let got = hold[ev.destination];
        if got < need - scaled_tol(need) {
            return fail(format!(
                "packet {} delivers {got} of {}, below {need}",
                ev.packet_id, ev.size
            ));
        }
    }

    let mut keys: Vec<_> = per_window.keys().copied().collect();
    keys.sort();
    for (j, e) in keys {
        let used = per_window[&(j, e)];
        let cap: f64 = ap.window_slots(j).map(|t| ws.rate(t, e)).sum::<f64>() * (1.0 - ap.eps);
        if used > cap + scaled_tol(cap) {
            return fail(format!(
                "window {j}, edge {e}: witness moves {used} but may move at most {cap}"
            ));
        }
    }

    ComplianceReport {
        passed: true,
        violation: None,
        packets: events.len(),
        moves: ws.moves.len(),
    }
}

/// Size limits for generated audit scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub max_nodes: usize,
    pub max_omega: u64,
    pub max_packets_per_window: usize,
    pub windows: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            max_nodes: 4,
            max_omega: 3,
            max_packets_per_window: 3,
            windows: 6,
        }
    }
}

/// A small network with a slot-by-slot adversary and its witness.
#[derive(Debug, Clone)]
pub struct WitnessScenario {
    pub spec: NetworkSpec,
    pub params: AdversaryParams,
    pub slots: Vec<SlotInput>,
    pub events: Vec<InjectionEvent>,
    pub witness: WitnessSchedule,
}

impl WitnessScenario {
    pub fn rate_sets(&self) -> Vec<Arc<RateSet>> {
        self.slots.iter().map(|s| s.rates.clone()).collect()
    }
}

const SCENARIO_R_MIN: f64 = 0.2;
const SCENARIO_R_MAX: f64 = 2.0;

fn shortest_path(spec: &NetworkSpec, s: usize, d: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; spec.node_count()];
    let mut seen = vec![false; spec.node_count()];
    seen[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        if v == d {
            let mut path = Vec::new();
            let mut x = d;
            while x != s {
                path.push(prev[x]);
                x = spec.edge(prev[x]).0;
            }
            path.reverse();
            return Some(path);
        }
        for (e, &(a, b)) in spec.edges().iter().enumerate() {
            if a == v && !seen[b] {
                seen[b] = true;
                prev[b] = e;
                queue.push_back(b);
            }
        }
    }
    None
}

/// Builds a random witness-backed scenario. Every packet follows a shortest
/// path, one hop per slot at the earliest slot where both endpoints are
/// free, and is dropped if it cannot arrive inside its window. The witness
/// runs each used edge at exactly amount / (1 - eps), and the slot's rate
/// set is a matching family containing that vector.
pub fn random_witness_scenario<R: Rng + ?Sized>(rng: &mut R, p: &ScenarioParams) -> WitnessScenario {
    loop {
        if let Some(s) = try_scenario(rng, p) {
            return s;
        }
    }
}

fn try_scenario<R: Rng + ?Sized>(rng: &mut R, p: &ScenarioParams) -> Option<WitnessScenario> {
    let n = rng.random_range(2..=p.max_nodes.max(2));
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(0.6) {
                edges.push((a, b));
            }
        }
    }
    if edges.is_empty() {
        return None;
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    let dcount = rng.random_range(1..=(n - 1).min(2));
    for i in 0..dcount {
        let j = rng.random_range(i..n);
        nodes.swap(i, j);
    }
    let mut dests = nodes[..dcount].to_vec();
    dests.sort();
    let spec = NetworkSpec::new(n, edges, dests.clone(), 1.0, SCENARIO_R_MIN, SCENARIO_R_MAX).ok()?;
    let eps = rng.random_range(0.1..0.5);
    let omega = rng.random_range(1..=p.max_omega.max(1));
    let params = AdversaryParams { omega, eps };
    let horizon = p.windows * omega;
    let k = spec.edge_count();

    let mut busy = vec![vec![false; n]; horizon as usize];
    let mut amount = vec![vec![0.0; k]; horizon as usize];
    let mut events: Vec<InjectionEvent> = Vec::new();
    let mut witness = WitnessSchedule::default();
    let mut next_id = 0;
    for j in 0..p.windows {
        let count = rng.random_range(0..=p.max_packets_per_window);
        for _ in 0..count {
            let tp = rng.random_range(params.window_slots(j));
            let d = dests[rng.random_range(0..dests.len())];
            let s = rng.random_range(0..n);
            if s == d {
                continue;
            }
            let Some(path) = shortest_path(&spec, s, d) else {
                continue;
            };
            let last = (tp + omega).min(horizon);
            let mut slot = tp;
            let mut hops = Vec::new();
            for &e in &path {
                let (a, b) = spec.edge(e);
                while slot < last && (busy[slot as usize][a] || busy[slot as usize][b]) {
                    slot += 1;
                }
                if slot >= last {
                    break;
                }
                hops.push((e, slot));
                slot += 1;
            }
            if hops.len() < path.len() {
                continue;
            }
            let ell = rng.random_range(SCENARIO_R_MIN..=(1.0 - eps) * SCENARIO_R_MAX);
            for &(e, t) in &hops {
                let (a, b) = spec.edge(e);
                busy[t as usize][a] = true;
                busy[t as usize][b] = true;
                amount[t as usize][e] = ell;
                witness.moves.push(WitnessMove {
                    packet_id: next_id,
                    edge: e,
                    slot: t,
                    amount: ell,
                });
            }
            events.push(InjectionEvent {
                packet_id: next_id,
                slot: tp,
                node: s,
                destination: d,
                size: ell,
            });
            next_id += 1;
        }
    }
    events.sort_by_key(|e| (e.slot, e.packet_id));

    let mut slots = Vec::with_capacity(horizon as usize);
    for t in 0..horizon as usize {
        let mut caps = vec![0.0; k];
        let mut wrate = vec![0.0; k];
        let mut any = false;
        for e in 0..k {
            if amount[t][e] > 0.0 {
                caps[e] = amount[t][e] / (1.0 - eps);
                wrate[e] = caps[e];
                any = true;
            } else if rng.random_bool(0.5) {
                caps[e] = rng.random_range(SCENARIO_R_MIN..=SCENARIO_R_MAX);
            }
        }
        if any {
            witness.rate_vectors.insert(t as u64, wrate);
        }
        let injections = events.iter().filter(|e| e.slot == t as u64).cloned().collect();
        slots.push(SlotInput {
            rates: Arc::new(RateSet::matching(caps)),
            injections,
        });
    }
    Some(WitnessScenario {
        spec,
        params,
        slots,
        events,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_edge() -> NetworkSpec {
        NetworkSpec::new(2, vec![(0, 1)], vec![1], 1.0, 0.1, 1.0).unwrap()
    }

    fn packet(size: f64) -> InjectionEvent {
        InjectionEvent {
            packet_id: 0,
            slot: 0,
            node: 0,
            destination: 1,
            size,
        }
    }

    #[test]
    fn empty_stream_passes() {
        let spec = one_edge();
        let ap = AdversaryParams::new(1, 0.1).unwrap();
        let r = check_witness_compliance(&spec, &WitnessSchedule::default(), &[], &[], &ap);
        assert!(r.passed);
    }

    #[test]
    fn immediate_service_passes() {
        let spec = one_edge();
        let ap = AdversaryParams::new(1, 0.1).unwrap();
        let mut ws = WitnessSchedule::default();
        ws.rate_vectors.insert(0, vec![1.0]);
        ws.moves.push(WitnessMove {
            packet_id: 0,
            edge: 0,
            slot: 0,
            amount: 0.9,
        });
        let rates = vec![Arc::new(RateSet::explicit(vec![vec![1.0]]))];
        let r = check_witness_compliance(&spec, &ws, &[packet(0.9)], &rates, &ap);
        assert!(r.passed, "{:?}", r.violation);
    }

    #[test]
    fn zero_rate_witness_fails() {
        let spec = one_edge();
        let ap = AdversaryParams::new(1, 0.1).unwrap();
        let mut ws = WitnessSchedule::default();
        ws.moves.push(WitnessMove {
            packet_id: 0,
            edge: 0,
            slot: 0,
            amount: 0.9,
        });
        let rates = vec![Arc::new(RateSet::explicit(vec![vec![1.0]]))];
        let r = check_witness_compliance(&spec, &ws, &[packet(0.9)], &rates, &ap);
        assert!(!r.passed);
        assert!(r.violation.unwrap().contains("window 0"));
    }

    #[test]
    fn missing_witness_fails() {
        let spec = one_edge();
        let ap = AdversaryParams::new(1, 0.1).unwrap();
        let rates = vec![Arc::new(RateSet::explicit(vec![vec![1.0]]))];
        let r = check_witness_compliance(&spec, &WitnessSchedule::default(), &[packet(0.5)], &rates, &ap);
        assert!(r.violation.unwrap().contains("no witness"));
    }

    #[test]
    fn short_delivery_and_overdraw_fail() {
        let spec = NetworkSpec::new(3, vec![(0, 1), (1, 2)], vec![2], 1.0, 0.1, 2.0).unwrap();
        let ap = AdversaryParams::new(2, 0.1).unwrap();
        let rates = vec![Arc::new(RateSet::matching(vec![2.0, 2.0])); 2];
        let ev = InjectionEvent {
            packet_id: 0,
            slot: 0,
            node: 0,
            destination: 2,
            size: 1.0,
        };
        let mut ws = WitnessSchedule::default();
        ws.rate_vectors.insert(0, vec![2.0, 0.0]);
        ws.rate_vectors.insert(1, vec![0.0, 2.0]);
        // Forwards more than arrived at the relay.
        ws.moves.push(WitnessMove { packet_id: 0, edge: 0, slot: 0, amount: 0.5 });
        ws.moves.push(WitnessMove { packet_id: 0, edge: 1, slot: 1, amount: 1.0 });
        let r = check_witness_compliance(&spec, &ws, &[ev.clone()], &rates, &ap);
        assert!(r.violation.unwrap().contains("holds"));
        // Consistent but delivers only half.
        ws.moves[1].amount = 0.5;
        let r = check_witness_compliance(&spec, &ws, &[ev.clone()], &rates, &ap);
        assert!(r.violation.unwrap().contains("delivers"));
        ws.moves[0].amount = 1.0;
        ws.moves[1].amount = 1.0;
        assert!(check_witness_compliance(&spec, &ws, &[ev], &rates, &ap).passed);
    }

    #[test]
    fn infeasible_rate_vector_fails() {
        let spec = NetworkSpec::new(3, vec![(0, 1), (1, 2)], vec![2], 1.0, 0.1, 2.0).unwrap();
        let ap = AdversaryParams::new(1, 0.1).unwrap();
        let rates = vec![Arc::new(RateSet::matching(vec![2.0, 2.0]))];
        let mut ws = WitnessSchedule::default();
        ws.rate_vectors.insert(0, vec![1.0, 1.0]);
        let r = check_witness_compliance(&spec, &ws, &[], &rates, &ap);
        assert!(r.violation.unwrap().contains("not feasible"));
    }

    #[test]
    fn generated_scenarios_comply() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let sc = random_witness_scenario(&mut rng, &ScenarioParams::default());
            for s in &sc.slots {
                s.rates.validate(&sc.spec).unwrap();
            }
            let r = check_witness_compliance(&sc.spec, &sc.witness, &sc.events, &sc.rate_sets(), &sc.params);
            assert!(r.passed, "{:?}", r.violation);
        }
    }
}
