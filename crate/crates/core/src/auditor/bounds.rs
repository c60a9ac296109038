//! Exact-rational evaluation of the queue-bound recursion.
//!
//! For m queues the ladder is M_m = 0 and, for k = m-1 down to 1,
//!   b_j = ceil((j-1)/2 * (L_1 + ... + L_{j-1})^2)
//!   S_j = U(m-k, M_{k+1}, b_j)
//!   L_j = 2 (m-k) S_j^2 / eps
//!   M_k = L_k / R_min + S_k + 2 P_0 / (eps R_min)
//! with
//!   U(1, q0, b) = q0
//!   U(m, q0, 0) = sqrt((m-1) M_1^2 + max{m q0^2, m M_1^2 + 2 sqrt(m) R_max M_1 + R_max^2})
//!   U(m, q0, i) = U(m, U(m, q0, i-1) + R_max, 0).
//! Square roots are rounded up to rationals, so every value is an upper
//! bound on the real one. The numbers grow doubly exponentially in m, hence
//! the work budget.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{q_star, SlackConstants};
use crate::adversary::AdversaryParams;
use crate::error::{Error, Result};
use crate::model::NetworkSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Number of queues.
    pub n: usize,
    pub eps: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub q0: f64,
    /// Per-injection slack constant.
    pub c: f64,
    /// Most injections the adversary makes in one window.
    pub injections_per_window: u64,
    /// Most evaluations of U(m, q, 0) allowed.
    pub max_u_evals: u64,
    /// Most bits allowed in any numerator or denominator.
    pub max_bits: u64,
}

impl BoundParams {
    /// Queue count is (nodes - 1) per destination; C comes from the network.
    pub fn for_network(spec: &NetworkSpec, ap: &AdversaryParams, q0: f64, injections_per_window: u64) -> Self {
        BoundParams {
            n: (spec.node_count() - 1) * spec.dest_count(),
            eps: ap.eps,
            r_min: spec.r_min(),
            r_max: spec.r_max(),
            q0,
            c: SlackConstants::for_network(spec, ap.omega).c,
            injections_per_window,
            max_u_evals: 100_000,
            max_bits: 1 << 16,
        }
    }
}

/// An exact value with a float rendering for reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exact {
    pub value: String,
    pub approx: f64,
}

impl Exact {
    fn new(x: &BigRational) -> Self {
        Exact {
            value: x.to_string(),
            approx: x.to_f64().unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub k: usize,
    pub b: Vec<Exact>,
    pub s: Vec<Exact>,
    pub l: Vec<Exact>,
    pub m_k: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UEntry {
    pub queues: usize,
    pub q0: Exact,
    pub b: Exact,
    pub value: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub n: usize,
    pub c: f64,
    pub q_star: f64,
    pub p0: Exact,
    /// Ladder of the n-queue system, k = n-1 first.
    pub ladder: Vec<LadderLevel>,
    /// M_1 .. M_n.
    pub m: Vec<Exact>,
    pub u_table: Vec<UEntry>,
    /// Right-hand side of the potential bound at q0.
    pub potential_bound: Exact,
    /// Rounded-up square root of the potential bound.
    pub max_queue_bound: Exact,
    pub u_evaluations: u64,
    #[serde(skip)]
    pub m_exact: Vec<BigRational>,
    #[serde(skip)]
    pub potential_exact: BigRational,
}

fn rat(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidParameter(format!("{x} is not finite")))
}

fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn ceil_isqrt(x: &BigInt) -> BigInt {
    let s = x.sqrt();
    if &s * &s < *x {
        s + 1
    } else {
        s
    }
}

/// sqrt(a/b) rounded up: ceil(isqrt(a b)) / b.
fn sqrt_up(x: &BigRational) -> BigRational {
    let (a, b) = (x.numer(), x.denom());
    BigRational::new(ceil_isqrt(&(a * b)), b.clone())
}

fn ceil(x: &BigRational) -> BigRational {
    BigRational::from_integer(x.ceil().to_integer())
}

struct Calc {
    eps: BigRational,
    r_min: BigRational,
    r_max: BigRational,
    p0: BigRational,
    /// m1[m] = M_1 of the m-queue ladder.
    m1: Vec<BigRational>,
    evals: u64,
    max_evals: u64,
    max_bits: u64,
    table: Vec<UEntry>,
}

impl Calc {
    fn check_bits(&self, x: &BigRational) -> Result<()> {
        let bits = x.numer().bits().max(x.denom().bits());
        if bits > self.max_bits {
            return Err(Error::BudgetExceeded(format!(
                "a value needs {bits} bits (cap {})",
                self.max_bits
            )));
        }
        Ok(())
    }

    fn u0(&mut self, m: usize, q0: &BigRational) -> Result<BigRational> {
        self.evals += 1;
        if self.evals > self.max_evals {
            return Err(Error::BudgetExceeded(format!("more than {} evaluations of U", self.max_evals)));
        }
        let mm = int(m as u64);
        let m1 = &self.m1[m];
        let m1sq = m1 * m1;
        let rsq = &self.r_max * &self.r_max;
        let a = &mm * q0 * q0;
        let b = &mm * &m1sq + sqrt_up(&(int(4) * &mm * &rsq * &m1sq)) + &rsq;
        let rhs = (&mm - BigRational::one()) * &m1sq + if a > b { a } else { b };
        let out = sqrt_up(&rhs);
        self.check_bits(&out)?;
        Ok(out)
    }

    fn u(&mut self, m: usize, q0: &BigRational, b: &BigRational) -> Result<BigRational> {
        let value = if m == 1 {
            q0.clone()
        } else {
            let remaining = self.max_evals.saturating_sub(self.evals);
            if *b >= int(remaining) {
                return Err(Error::BudgetExceeded(format!(
                    "U({m}, ., b) needs b + 1 evaluations with b = {}",
                    b.to_integer()
                )));
            }
            let steps = b.to_integer().to_u64().unwrap_or(u64::MAX);
            let mut x = self.u0(m, q0)?;
            for _ in 0..steps {
                let next = &x + &self.r_max;
                x = self.u0(m, &next)?;
            }
            x
        };
        self.table.push(UEntry {
            queues: m,
            q0: Exact::new(q0),
            b: Exact::new(b),
            value: Exact::new(&value),
        });
        Ok(value)
    }

    /// Ladder of the m-queue system; returns the levels and M_1 .. M_m.
    fn ladder(&mut self, m: usize) -> Result<(Vec<LadderLevel>, Vec<BigRational>)> {
        let mut mk = vec![BigRational::zero(); m + 1];
        let mut levels = Vec::new();
        let tail = int(2) * &self.p0 / (&self.eps * &self.r_min);
        for k in (1..m).rev() {
            let sub = m - k;
            let (mut bs, mut ss, mut ls) = (Vec::new(), Vec::new(), Vec::new());
            let mut lsum = BigRational::zero();
            for j in 1..=k {
                let b = ceil(&(int(j as u64 - 1) / int(2) * &lsum * &lsum));
                let s = self.u(sub, &mk[k + 1], &b)?;
                let l = int(2 * sub as u64) * &s * &s / &self.eps;
                self.check_bits(&l)?;
                lsum += &l;
                bs.push(b);
                ss.push(s);
                ls.push(l);
            }
            mk[k] = &ls[k - 1] / &self.r_min + &ss[k - 1] + &tail;
            levels.push(LadderLevel {
                k,
                b: bs.iter().map(Exact::new).collect(),
                s: ss.iter().map(Exact::new).collect(),
                l: ls.iter().map(Exact::new).collect(),
                m_k: Exact::new(&mk[k]),
            });
        }
        Ok((levels, mk.split_off(1)))
    }
}

/// Evaluates the ladder and the potential bound for `p.n` queues.
pub fn compute_bound_constants(p: &BoundParams) -> Result<BoundConstants> {
    if p.n == 0 {
        return Err(Error::InvalidParameter("need at least one queue".into()));
    }
    if !(p.eps > 0.0 && p.eps < 1.0) || !(p.r_min > 0.0 && p.r_min <= p.r_max) || p.q0 < 0.0 {
        return Err(Error::InvalidParameter("need 0 < eps < 1, 0 < R_min <= R_max, q0 >= 0".into()));
    }
    let qs = q_star(p.eps, p.r_min, p.c);
    let p0 = int(p.injections_per_window) * rat(2.0 * p.r_max * qs + p.r_max * p.r_max)?;
    let mut calc = Calc {
        eps: rat(p.eps)?,
        r_min: rat(p.r_min)?,
        r_max: rat(p.r_max)?,
        p0: p0.clone(),
        m1: vec![BigRational::zero(); p.n + 1],
        evals: 0,
        max_evals: p.max_u_evals,
        max_bits: p.max_bits,
        table: Vec::new(),
    };
    let mut top = (Vec::new(), vec![BigRational::zero()]);
    for m in 2..=p.n {
        let (levels, ms) = calc.ladder(m)?;
        calc.m1[m] = ms[0].clone();
        top = (levels, ms);
    }
    let q0 = rat(p.q0)?;
    let max_queue = calc.u(p.n, &q0, &BigRational::zero())?;
    let potential = if p.n == 1 {
        &q0 * &q0
    } else {
        // u0 returns the rounded-up root of this quantity; rebuild it.
        let n = int(p.n as u64);
        let m1 = &calc.m1[p.n];
        let m1sq = m1 * m1;
        let rsq = &calc.r_max * &calc.r_max;
        let a = &n * &q0 * &q0;
        let b = &n * &m1sq + sqrt_up(&(int(4) * &n * &rsq * &m1sq)) + &rsq;
        (&n - BigRational::one()) * &m1sq + if a > b { a } else { b }
    };
    Ok(BoundConstants {
        n: p.n,
        c: p.c,
        q_star: qs,
        p0: Exact::new(&p0),
        ladder: top.0,
        m: top.1.iter().map(Exact::new).collect(),
        u_table: calc.table,
        potential_bound: Exact::new(&potential),
        max_queue_bound: Exact::new(&max_queue),
        u_evaluations: calc.evals,
        m_exact: top.1,
        potential_exact: potential,
    })
}
