//! Max-Weight(beta) slot decisions, exact and synthetically degraded.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::max_weight_matching;
use crate::model::{pow_beta, NetworkSpec, QueueMatrix, RateSet, ScheduleDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproxMode {
    Exact,
    SyntheticDegrade,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub eps_hat: f64,
    pub mode: ApproxMode,
}

impl Default for ApproxParams {
    fn default() -> Self {
        Self::exact()
    }
}

impl ApproxParams {
    pub fn exact() -> Self {
        ApproxParams {
            eps_hat: 0.0,
            mode: ApproxMode::Exact,
        }
    }

    pub fn degrade(eps_hat: f64) -> Result<Self> {
        let p = ApproxParams {
            eps_hat,
            mode: ApproxMode::SyntheticDegrade,
        };
        p.validate()?;
        Ok(p)
    }

    /// eps_hat must be zero exactly in exact mode and in (0, 1) otherwise.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.mode {
            ApproxMode::Exact => self.eps_hat == 0.0,
            ApproxMode::SyntheticDegrade => self.eps_hat > 0.0 && self.eps_hat < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "eps_hat = {} does not fit mode {:?}",
                self.eps_hat, self.mode
            )))
        }
    }
}

/// Best commodity for edge `e` at rate `r_e`: returns the weight
/// s_e (q_v^beta - q_u^beta) and the destination column achieving it.
///
/// The argmax is taken over the weight itself, not the bare differential,
/// since the two disagree once s_e is differential-limited and beta != 1.
/// Ties go to the lowest column. Nonpositive weights yield `(0, None)`.
pub fn edge_weight(spec: &NetworkSpec, q: &QueueMatrix, e: usize, r_e: f64) -> (f64, Option<usize>) {
    if r_e <= 0.0 {
        return (0.0, None);
    }
    let (v, u) = spec.edge(e);
    let beta = spec.beta();
    let (qv, qu) = (q.row(v), q.row(u));
    let mut best = (0.0, None);
    for di in 0..qv.len() {
        let gap = qv[di] - qu[di];
        if gap <= 0.0 {
            continue;
        }
        let s = r_e.min(gap / 2.0);
        let w = s * (pow_beta(qv[di], beta) - pow_beta(qu[di], beta));
        if w > best.0 {
            best = (w, Some(di));
        }
    }
    best
}

fn fill_decision(spec: &NetworkSpec, q: &QueueMatrix, dec: &mut ScheduleDecision, e: usize, r_e: f64) {
    dec.rates[e] = r_e;
    if let (w, Some(di)) = edge_weight(spec, q, e, r_e) {
        if w > 0.0 {
            let (v, u) = spec.edge(e);
            dec.dest[e] = Some(di);
            dec.transfer[e] = r_e.min((q.get(v, di) - q.get(u, di)) / 2.0);
        }
    }
}

/// Exact Max-Weight(beta) decision for one slot.
///
/// Explicit sets are scanned in order and the first maximizing vector
/// wins. Matching families are solved as a maximum-weight matching on the
/// undirected support; among optimal matchings the one whose sorted edge
/// list is lexicographically smallest is chosen. A zero optimum returns the
/// all-zero decision.
pub fn max_weight_exact(spec: &NetworkSpec, q: &QueueMatrix, rs: &RateSet) -> ScheduleDecision {
    let k = spec.edge_count();
    match rs {
        RateSet::Explicit { vectors } => {
            let mut best: Option<(f64, usize)> = None;
            for (i, r) in vectors.iter().enumerate() {
                let obj: f64 = (0..k).map(|e| edge_weight(spec, q, e, r[e]).0).sum();
                if obj > 0.0 && best.is_none_or(|(b, _)| obj > b) {
                    best = Some((obj, i));
                }
            }
            let mut dec = ScheduleDecision::zero(k);
            if let Some((_, i)) = best {
                for e in 0..k {
                    fill_decision(spec, q, &mut dec, e, vectors[i][e]);
                }
            }
            dec
        }
        RateSet::Matching { caps } => matching_decision(spec, q, caps),
    }
}

/// Scale for converting float weights to integers before matching.
const WEIGHT_BITS: u32 = 50;
/// Above this many candidate links the tie-break bonus would overflow i128.
const MAX_BONUS_LINKS: usize = 64;

fn matching_decision(spec: &NetworkSpec, q: &QueueMatrix, caps: &[f64]) -> ScheduleDecision {
    let k = spec.edge_count();
    let mut dec = ScheduleDecision::zero(k);

    // Best direction per undirected link; ties go to the lower edge index.
    let mut cands: Vec<(usize, f64)> = Vec::new();
    for link in spec.links() {
        let mut best: Option<(usize, f64)> = None;
        for &e in &link.edges {
            let w = edge_weight(spec, q, e, caps[e]).0;
            if w > 0.0 && best.is_none_or(|(_, b)| w > b) {
                best = Some((e, w));
            }
        }
        if let Some(c) = best {
            cands.push(c);
        }
    }
    if cands.is_empty() {
        return dec;
    }

    let mut degree = vec![0u8; spec.node_count()];
    let mut clash = false;
    for &(e, _) in &cands {
        let (a, b) = spec.edge(e);
        degree[a] += 1;
        degree[b] += 1;
        clash |= degree[a] > 1 || degree[b] > 1;
    }
    let chosen: Vec<usize> = if !clash {
        cands.iter().map(|c| c.0).collect()
    } else {
        let wmax = cands.iter().map(|c| c.1).fold(0.0, f64::max);
        let m = cands.len();
        let scale = (1u64 << WEIGHT_BITS) as f64 / wmax;
        let weighted: Vec<(usize, usize, i128)> = cands
            .iter()
            .enumerate()
            .map(|(i, &(e, w))| {
                let main = ((w * scale).round() as i128).max(1);
                let wt = if m <= MAX_BONUS_LINKS {
                    (main << m) + (1i128 << (m - 1 - i))
                } else {
                    main
                };
                let (a, b) = spec.edge(e);
                (a, b, wt)
            })
            .collect();
        let mate = max_weight_matching(spec.node_count(), &weighted);
        cands
            .iter()
            .filter(|&&(e, _)| mate[spec.edge(e).0] == Some(spec.edge(e).1))
            .map(|c| c.0)
            .collect()
    };
    for e in chosen {
        fill_decision(spec, q, &mut dec, e, caps[e]);
    }
    dec
}

/// Exact decision degraded on one random active edge so that the objective
/// lands in [(1 - eps_hat) J, J]. The edge's rate is lowered together with
/// its transfer, so the decision stays consistent with its rate vector.
pub fn max_weight_approx<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    q: &QueueMatrix,
    rs: &RateSet,
    ap: &ApproxParams,
    rng: &mut R,
) -> ScheduleDecision {
    let mut dec = max_weight_exact(spec, q, rs);
    if ap.mode == ApproxMode::Exact || ap.eps_hat <= 0.0 {
        return dec;
    }
    let j = dec.objective(spec, q);
    let active: Vec<usize> = (0..dec.transfer.len()).filter(|&e| dec.transfer[e] > 0.0).collect();
    if j <= 0.0 || active.is_empty() {
        return dec;
    }
    let e = active[rng.random_range(0..active.len())];
    let di = dec.dest[e].expect("active edge has a destination");
    let (v, u) = spec.edge(e);
    let beta = spec.beta();
    let diff = pow_beta(q.get(v, di), beta) - pow_beta(q.get(u, di), beta);
    let s = dec.transfer[e];
    let w = s * diff;
    let cut = w.min(ap.eps_hat * j * (1.0 - 1e-12));
    let s_new = s * (1.0 - cut / w);
    if s_new <= 0.0 {
        dec.rates[e] = 0.0;
        dec.transfer[e] = 0.0;
        dec.dest[e] = None;
    } else {
        dec.rates[e] = s_new;
        dec.transfer[e] = s_new;
    }
    dec
}
