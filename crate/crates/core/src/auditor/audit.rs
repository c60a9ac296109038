use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::shares::{build_gamma, water_fill_shares, PartialAssignment, SlotCheck};
use super::{classify_bad_packet, theorem_bound, PacketClass, SlackConstants};
use crate::adversary::{AdversaryParams, WitnessSchedule};
use crate::engine::AuditSlot;
use crate::error::{Error, Result};
use crate::model::{pow_beta, InjectionEvent, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AuditMode {
    Exact,
    /// The protocol only guarantees (1 - eps_hat) of the optimum.
    Approx { eps_hat: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketAudit {
    pub packet_id: u64,
    pub slot: u64,
    pub node: usize,
    pub destination: usize,
    pub size: f64,
    /// Height of the packet's queue just before it was added.
    pub q: f64,
    pub delta: f64,
    pub bound: f64,
    pub class: PacketClass,
    /// Both windows the packet can be charged in lie inside the trace.
    pub complete: bool,
    pub shares: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mode: AuditMode,
    /// The slack parameter the per-packet bound is evaluated with.
    pub eps_effective: f64,
    pub constants: SlackConstants,
    pub packets: Vec<PacketAudit>,
    pub slots: Vec<SlotCheck>,
    pub max_eq_gap: f64,
    pub all_dominated: bool,
    pub all_within_transfer: bool,
    /// Complete packets whose delta exceeds the bound.
    pub bound_violations: usize,
    pub bad_packets: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.all_dominated && self.all_within_transfer && self.bound_violations == 0 && self.max_eq_gap <= 1e-6
    }
}

/// (q + ell)^(beta+1) - q^(beta+1) minus the first-order potential drop of
/// every charged share, (beta + 1) * amount * diff.
pub fn per_packet_potential_delta(ell: f64, q: f64, beta: f64, gamma: Option<&PartialAssignment>) -> f64 {
    let rise = pow_beta(q + ell, beta + 1.0) - pow_beta(q, beta + 1.0);
    let fall: f64 = gamma
        .map(|g| g.shares.iter().map(|s| (beta + 1.0) * s.amount * s.diff).sum())
        .unwrap_or(0.0);
    rise - fall
}

/// Runs the share construction over an audited trace and evaluates every
/// injected packet against the per-packet bound.
pub fn audit_run(
    spec: &NetworkSpec,
    ap: &AdversaryParams,
    ws: &WitnessSchedule,
    slots: &[AuditSlot],
    mode: AuditMode,
) -> Result<AuditReport> {
    ap.validate()?;
    let eps = ap.eps;
    let (eps_eff, scale) = match mode {
        AuditMode::Exact => (eps, 1.0),
        AuditMode::Approx { eps_hat } => {
            if !(eps_hat >= 0.0 && eps_hat < eps) {
                return Err(Error::InvalidParameter(format!(
                    "eps_hat = {eps_hat} must lie in [0, eps = {eps})"
                )));
            }
            ((eps - eps_hat) / (1.0 - eps_hat), 1.0 - eps_hat)
        }
    };
    for (i, s) in slots.iter().enumerate() {
        if s.slot != i as u64 {
            return Err(Error::InvalidParameter("audit slots must start at 0 and be contiguous".into()));
        }
    }
    let beta = spec.beta();
    let horizon = slots.len() as u64;
    let mut by_window: BTreeMap<u64, Vec<InjectionEvent>> = BTreeMap::new();
    for s in slots {
        for ev in &s.injections {
            by_window.entry(ap.window_of(ev.slot)).or_default().push(ev.clone());
        }
    }

    let windows = horizon.div_ceil(ap.omega);
    let mut gammas: BTreeMap<u64, PartialAssignment> = BTreeMap::new();
    let mut checks = Vec::new();
    for j in 0..windows {
        let mut packets: Vec<InjectionEvent> = Vec::new();
        if j > 0 {
            packets.extend(by_window.get(&(j - 1)).into_iter().flatten().cloned());
        }
        packets.extend(by_window.get(&j).into_iter().flatten().cloned());
        let alloc = water_fill_shares(spec, ws, ap, j, &packets, eps_eff)?;
        let r = ap.window_slots(j);
        let win = &slots[r.start as usize..(r.end.min(horizon)) as usize];
        let g = build_gamma(spec, ws, &alloc, &packets, win, scale)?;
        for (pid, pa) in g.assignments {
            gammas
                .entry(pid)
                .or_insert_with(|| PartialAssignment {
                    packet_id: pid,
                    shares: Vec::new(),
                })
                .shares
                .extend(pa.shares);
        }
        checks.extend(g.checks);
    }

    let constants = SlackConstants::for_network(spec, ap.omega);
    let mut packets = Vec::new();
    for s in slots {
        let mut q = s.q_after_service.clone();
        for ev in &s.injections {
            let di = spec.dest_index(ev.destination).ok_or_else(|| Error::InvalidInjection {
                packet_id: ev.packet_id,
                reason: "destination not in D".into(),
            })?;
            let own = ev.node == ev.destination;
            let height = if own { 0.0 } else { q.get(ev.node, di) };
            let gamma = gammas.get(&ev.packet_id);
            let delta = if own {
                0.0
            } else {
                per_packet_potential_delta(ev.size, height, beta, gamma)
            };
            if !own {
                q.add(ev.node, di, ev.size);
            }
            let bound = theorem_bound(ev.size, height, eps_eff, beta, &constants);
            packets.push(PacketAudit {
                packet_id: ev.packet_id,
                slot: ev.slot,
                node: ev.node,
                destination: ev.destination,
                size: ev.size,
                q: height,
                delta,
                bound,
                class: classify_bad_packet(delta, ev.size, height, eps_eff, constants.c),
                complete: (ap.window_of(ev.slot) + 2) * ap.omega <= horizon,
                shares: gamma.map_or(0, |g| g.shares.len()),
            });
        }
    }

    Ok(AuditReport {
        mode,
        eps_effective: eps_eff,
        constants,
        max_eq_gap: checks.iter().map(|c| c.eq_gap).fold(0.0, f64::max),
        all_dominated: checks.iter().all(|c| c.dominated),
        all_within_transfer: checks.iter().all(|c| c.within_transfer),
        bound_violations: packets.iter().filter(|p| p.complete && p.delta > p.bound).count(),
        bad_packets: packets.iter().filter(|p| p.class == PacketClass::Bad).count(),
        packets,
        slots: checks,
    })
}
