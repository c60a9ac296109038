use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryParams, WitnessSchedule};
use crate::engine::AuditSlot;
use crate::error::{Error, Result};
use crate::model::{pow_beta, InjectionEvent, NetworkSpec, TOL};
use crate::scheduler::{edge_weight, max_weight_exact};

/// d(p, e, t'): the slice of the witness rate on edge e in slot t'
/// reserved for packet p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DShare {
    pub packet_id: u64,
    pub edge: usize,
    pub slot: u64,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateShareAllocation {
    pub window: u64,
    pub shares: Vec<DShare>,
}

/// Part of a protocol transfer charged to one packet. `diff` is
/// q_v^beta - q_u^beta on the protocol's commodity at the start of `slot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub slot: u64,
    pub edge: usize,
    pub dest: usize,
    pub amount: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialAssignment {
    pub packet_id: u64,
    pub shares: Vec<Share>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotCheck {
    pub slot: u64,
    /// Objective of the decision actually taken.
    pub j: f64,
    /// Objective of an exact Max-Weight decision at the same state.
    pub j_exact: f64,
    /// Sum of packet credits before the per-edge cap.
    pub k_uncapped: f64,
    /// Sum of packet credits after capping and scaling.
    pub k_total: f64,
    /// Sum over shares of amount * diff.
    pub weighted_shares: f64,
    /// |weighted_shares - k_total| / max(1, k_total).
    pub eq_gap: f64,
    /// Per-edge share totals stay within the protocol transfer.
    pub within_transfer: bool,
    /// k_total <= j (up to tolerance).
    pub dominated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaWindow {
    pub window: u64,
    pub assignments: BTreeMap<u64, PartialAssignment>,
    pub checks: Vec<SlotCheck>,
}

/// Splits the witness rate of each edge over window `j` among `packets`
/// (the injections of windows j and j-1, in injection order). Packet p gets
/// sum_t' d(p,e,t') = L(p,e) / (1 - eps), where L(p,e) is what the witness
/// moves of p over e inside the window, filled earliest slot first.
pub fn water_fill_shares(
    spec: &NetworkSpec,
    ws: &WitnessSchedule,
    ap: &AdversaryParams,
    j: u64,
    packets: &[InjectionEvent],
    eps: f64,
) -> Result<RateShareAllocation> {
    let slots = ap.window_slots(j);
    let k = spec.edge_count();
    let mut moved: BTreeMap<(u64, usize), f64> = BTreeMap::new();
    for m in &ws.moves {
        if slots.contains(&m.slot) {
            *moved.entry((m.packet_id, m.edge)).or_insert(0.0) += m.amount;
        }
    }
    let mut residual: Vec<Vec<f64>> = (0..k)
        .map(|e| slots.clone().map(|t| ws.rate(t, e)).collect())
        .collect();
    let mut shares = Vec::new();
    for p in packets {
        for (e, res) in residual.iter_mut().enumerate() {
            let l = moved.get(&(p.packet_id, e)).copied().unwrap_or(0.0);
            if l <= 0.0 {
                continue;
            }
            let mut need = l / (1.0 - eps);
            for (i, r) in res.iter_mut().enumerate() {
                if need <= 0.0 {
                    break;
                }
                let take = need.min(*r);
                if take > 0.0 {
                    *r -= take;
                    need -= take;
                    shares.push(DShare {
                        packet_id: p.packet_id,
                        edge: e,
                        slot: slots.start + i as u64,
                        amount: take,
                    });
                }
            }
            if need > TOL * (1.0 + l) {
                return Err(Error::InfeasibleAllocation {
                    edge: e,
                    window: j,
                    shortfall: need,
                });
            }
        }
    }
    Ok(RateShareAllocation { window: j, shares })
}

/// Charges protocol transfers to packets for every slot of the window.
///
/// Packet i's credit on edge e in slot t' is d(p_i,e,t') times the positive
/// part of its own commodity's differential; per edge the credits are
/// capped at the Max-Weight value of the witness rate and then multiplied
/// by `credit_scale`. Credits are then paid out of the protocol's
/// transfers edge by edge: share = min(J_res / D, s_res, k_res / D), where
/// D is the differential of the protocol's commodity on that edge.
pub fn build_gamma(
    spec: &NetworkSpec,
    ws: &WitnessSchedule,
    alloc: &RateShareAllocation,
    packets: &[InjectionEvent],
    slots: &[AuditSlot],
    credit_scale: f64,
) -> Result<GammaWindow> {
    let beta = spec.beta();
    let order: BTreeMap<u64, usize> = packets.iter().enumerate().map(|(i, p)| (p.packet_id, i)).collect();
    let mut out = GammaWindow {
        window: alloc.window,
        ..GammaWindow::default()
    };
    for slot in slots {
        let q = &slot.q_before;
        let t = slot.slot;
        // credit[e][i]
        let mut credit: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for d in alloc.shares.iter().filter(|d| d.slot == t) {
            let i = order[&d.packet_id];
            let Some(di) = spec.dest_index(packets[i].destination) else {
                continue;
            };
            let (v, u) = spec.edge(d.edge);
            let delta = (pow_beta(q.get(v, di), beta) - pow_beta(q.get(u, di), beta)).max(0.0);
            credit.entry(d.edge).or_insert_with(|| vec![0.0; packets.len()])[i] += d.amount * delta;
        }
        let mut k_uncapped = 0.0;
        let mut k_pkt = vec![0.0; packets.len()];
        for (&e, ks) in &credit {
            let total: f64 = ks.iter().sum();
            k_uncapped += total;
            if total <= 0.0 {
                continue;
            }
            let cap = edge_weight(spec, q, e, ws.rate(t, e)).0;
            let f = credit_scale * if total > cap { cap / total } else { 1.0 };
            for (i, &k) in ks.iter().enumerate() {
                k_pkt[i] += k * f;
            }
        }
        let k_total: f64 = k_pkt.iter().sum();

        let dec = &slot.decision;
        let j = dec.objective(spec, q);
        let j_exact = max_weight_exact(spec, q, &slot.rates).objective(spec, q);
        let mut j_res = j;
        let mut weighted = 0.0;
        let mut within = true;
        for e in 0..spec.edge_count() {
            let s = dec.transfer[e];
            let Some(de) = dec.dest[e] else { continue };
            if s <= 0.0 {
                continue;
            }
            let (v, u) = spec.edge(e);
            let diff = pow_beta(q.get(v, de), beta) - pow_beta(q.get(u, de), beta);
            if diff <= 0.0 {
                continue;
            }
            let mut s_res = s;
            for (i, k_res) in k_pkt.iter_mut().enumerate() {
                if *k_res <= 0.0 || s_res <= 0.0 || j_res <= 0.0 {
                    continue;
                }
                let share = (j_res / diff).min(s_res).min(*k_res / diff);
                if share <= 0.0 {
                    continue;
                }
                j_res -= share * diff;
                s_res -= share;
                *k_res -= share * diff;
                weighted += share * diff;
                for (what, value) in [("J", j_res), ("s", s_res), ("k", *k_res)] {
                    if value < -TOL * (1.0 + j) {
                        return Err(Error::NegativeResidual { what, value });
                    }
                }
                let pid = packets[i].packet_id;
                out.assignments
                    .entry(pid)
                    .or_insert_with(|| PartialAssignment {
                        packet_id: pid,
                        shares: Vec::new(),
                    })
                    .shares
                    .push(Share {
                        slot: t,
                        edge: e,
                        dest: de,
                        amount: share,
                        diff,
                    });
            }
            within &= s_res >= -TOL * (1.0 + s);
        }
        out.checks.push(SlotCheck {
            slot: t,
            j,
            j_exact,
            k_uncapped,
            k_total,
            weighted_shares: weighted,
            eq_gap: (weighted - k_total).abs() / k_total.max(1.0),
            within_transfer: within,
            dominated: k_total <= j + TOL * (1.0 + j),
        });
    }
    Ok(out)
}
