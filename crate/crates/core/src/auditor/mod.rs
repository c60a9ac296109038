//! Executable versions of the stability proof's constructions: rate-share
//! water-filling, per-packet transmission assignments, potential
//! accounting, bad-packet classification and the bound ladder.

mod audit;
pub mod bounds;
mod shares;

use serde::{Deserialize, Serialize};

use crate::model::NetworkSpec;

pub use audit::{audit_run, per_packet_potential_delta, AuditMode, AuditReport, PacketAudit};
pub use bounds::{compute_bound_constants, BoundConstants, BoundParams};
pub use shares::{
    build_gamma, water_fill_shares, DShare, GammaWindow, PartialAssignment, RateShareAllocation,
    Share, SlotCheck,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketClass {
    Good,
    Bad,
}

/// Per-injection slack constants.
///
/// `b` multiplies ell * (q + n R_max omega)^(beta - 1) in the per-packet
/// bound; it is omega slots times k links times the largest queue drift
/// 2 n R_max omega over a window. For beta = 1 the term is at most
/// `c = b * R_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackConstants {
    pub b: f64,
    pub c: f64,
    pub drift: f64,
}

impl SlackConstants {
    pub fn for_network(spec: &NetworkSpec, omega: u64) -> Self {
        let n = spec.node_count() as f64;
        let k = spec.edge_count() as f64;
        let w = omega as f64;
        let drift = n * spec.r_max() * w;
        let b = w * k * 2.0 * drift;
        SlackConstants {
            b,
            c: b * spec.r_max(),
            drift,
        }
    }
}

/// Upper bound on a packet's potential change:
/// -(eps / (1 - eps/2)) ell (beta+1) q^beta + B ell (beta+1)/2 (q + drift)^(beta-1).
/// For beta = 1 the second term is B ell, at most C.
pub fn theorem_bound(ell: f64, q: f64, eps: f64, beta: f64, k: &SlackConstants) -> f64 {
    let lead = -(eps / (1.0 - eps / 2.0)) * ell * (beta + 1.0) * q.max(0.0).powf(beta);
    let slack = if beta == 1.0 {
        k.c
    } else {
        k.b * ell * (beta + 1.0) / 2.0 * (q.max(0.0) + k.drift).powf(beta - 1.0)
    };
    lead + slack
}

/// Bad iff delta >= -(eps / (1 - eps/2)) ell q + C + 1 (boundary inclusive).
pub fn classify_bad_packet(delta: f64, ell: f64, q: f64, eps: f64, c: f64) -> PacketClass {
    if delta >= -(eps / (1.0 - eps / 2.0)) * ell * q + c + 1.0 {
        PacketClass::Bad
    } else {
        PacketClass::Good
    }
}

/// q* = (4 - 2 eps) / ((2 eps + eps^2) ell) (C + 1).
pub fn q_star(eps: f64, ell: f64, c: f64) -> f64 {
    (4.0 - 2.0 * eps) / ((2.0 * eps + eps * eps) * ell) * (c + 1.0)
}

/// (m/2) (r_1 + ... + r_m)^2.
pub fn small_link_transfer_bound(gaps: &[f64]) -> f64 {
    let s: f64 = gaps.iter().sum();
    gaps.len() as f64 / 2.0 * s * s
}

/// Equalizes a chain of queues using only transfers across adjacent pairs:
/// each step moves min(rate, gap/2) over the currently largest gap, from
/// the taller queue to the shorter. Stops once every gap is below `tol` or
/// after `max_steps`. Returns the total mass moved.
pub fn equalize_chain(heights: &mut [f64], rate: f64, tol: f64, max_steps: usize) -> f64 {
    let mut moved = 0.0;
    for _ in 0..max_steps {
        let mut best = (0.0, 0);
        for i in 0..heights.len().saturating_sub(1) {
            let g = (heights[i] - heights[i + 1]).abs();
            if g > best.0 {
                best = (g, i);
            }
        }
        if best.0 < tol {
            break;
        }
        let i = best.1;
        let amount = rate.min(best.0 / 2.0);
        if heights[i] > heights[i + 1] {
            heights[i] -= amount;
            heights[i + 1] += amount;
        } else {
            heights[i] += amount;
            heights[i + 1] -= amount;
        }
        moved += amount;
    }
    moved
}
