//! First-price pacing equilibrium: the component-wise maximal feasible
//! multiplier profile when every advertiser bids `mu_a v_a(q)` and winners
//! pay their own bid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    evaluate_outcome, AuctionFormat, ConstraintProfile, DiscreteInstance, Outcome, TieBreakRule,
    UniformBidProfile, MONEY_TOL,
};

/// Step used by the maximality certificate.
pub const RAISE_STEP: f64 = 1e-6;
/// Convergence tolerance on multipliers.
pub const MU_TOL: f64 = 1e-10;
const MAX_ROUNDS: usize = 100_000;
const STRICT_TOL: f64 = 1e-14;
/// Relative move below which a round counts as a tie chase.
const CHASE_STEP: f64 = 1e-11;
/// Consecutive ulp-sized rounds before a chase is skipped.
const CHASE_WINDOW: usize = 3;

/// Why an advertiser's multiplier cannot be raised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum Certificate {
    AtCap,
    /// Raising by [`RAISE_STEP`] leaves `slack_after < 0`.
    BlockedByConstraint { slack_after: f64 },
    /// Raising by [`RAISE_STEP`] stays feasible; only possible when the
    /// supremum sits on a tie threshold or the fixed point is inexact.
    Unblocked { slack_after: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacingSolution {
    pub multipliers: Vec<f64>,
    pub cap: f64,
    pub winner: Vec<Option<usize>>,
    pub values: Vec<f64>,
    pub spends: Vec<f64>,
    pub slacks: Vec<f64>,
    pub certificates: Vec<Certificate>,
    /// Queries whose top bid was tied.
    pub tied_queries: Vec<usize>,
    pub rounds: usize,
}

impl PacingSolution {
    pub fn is_maximal(&self) -> bool {
        self.certificates.iter().all(|c| !matches!(c, Certificate::Unblocked { .. }))
    }
}

/// `10 * max_a max(T_a, 1)`.
pub fn default_cap(inst: &DiscreteInstance) -> f64 {
    10.0 * inst
        .constraints
        .iter()
        .map(|c| c.target.unwrap_or(1.0).max(1.0))
        .fold(1.0, f64::max)
}

fn outcome(inst: &DiscreteInstance, mu: &[f64]) -> Outcome {
    evaluate_outcome(
        inst,
        &UniformBidProfile::new(mu.to_vec()),
        AuctionFormat::Fpa,
        TieBreakRule::FavorListedOrder,
    )
    .expect("multipliers validated by caller")
}

/// `B + T value - spend` with a missing budget read as zero, so a
/// target-only advertiser needs `(mu - T) value <= 0`.
fn slack_of(c: &ConstraintProfile, out: &Outcome, a: usize) -> f64 {
    c.slack(out.spend[a], out.value[a])
}

/// Feasibility up to rounding only, so the descent does not creep into the
/// looser reporting tolerance.
fn feasible_for(inst: &DiscreteInstance, mu: &[f64], a: usize) -> bool {
    let out = outcome(inst, mu);
    let allowance = inst.constraints[a].allowance(out.value[a]);
    out.spend[a] <= allowance + STRICT_TOL * (1.0 + allowance.abs())
}

/// Largest `mu_a <= mu[a]` keeping `a` feasible with the others fixed.
///
/// Feasibility is monotone in `mu_a`. Between consecutive win thresholds
/// `t_q = max_o mu_o v_o(q) / v_a(q)` the won value `V` is constant and the
/// bound is `mu_a <= T + B / V`; at a threshold the listed-order tie rule
/// decides, so thresholds are checked by direct evaluation. When the
/// supremum sits on a threshold that `a` would win, the largest float
/// below it is returned.
fn lower_to_feasible(inst: &DiscreteInstance, mu: &mut [f64], a: usize) {
    let c = inst.constraints[a];
    let mut probe = mu.to_vec();
    let mut ok = |x: f64| {
        probe[a] = x;
        feasible_for(inst, &probe, a)
    };
    let thresholds: Vec<(f64, f64)> = {
        let mut t: Vec<(f64, f64)> = (0..inst.n_queries())
            .filter(|&q| inst.values[a][q] > 0.0)
            .map(|q| {
                let other = (0..inst.n_advertisers())
                    .filter(|&o| o != a)
                    .map(|o| mu[o] * inst.values[o][q])
                    .fold(0.0, f64::max);
                (other / inst.values[a][q], inst.values[a][q])
            })
            .collect();
        t.sort_by(|x, y| x.0.total_cmp(&y.0));
        t
    };
    let bound = |v: f64| {
        if v > 0.0 {
            c.target.unwrap_or(0.0) + c.budget.unwrap_or(0.0) / v
        } else {
            f64::INFINITY
        }
    };
    let mut hi = mu[a];
    // Segment k covers (t_k, t_{k+1}) and wins the first k + 1 thresholds.
    let mut k = thresholds.partition_point(|t| t.0 < hi);
    loop {
        let lo = if k == 0 { 0.0 } else { thresholds[k - 1].0 };
        let v: f64 = thresholds[..k].iter().map(|t| t.1).sum();
        let u = bound(v);
        if u >= hi {
            // Supremum of this segment is its open top end.
            let mut x = hi.next_down();
            while x > lo && !ok(x) {
                x = x.next_down();
            }
            if x > lo || k == 0 {
                mu[a] = x.max(0.0);
                return;
            }
        } else if u > lo {
            let mut x = u;
            while x > lo && !ok(x) {
                x = x.next_down();
            }
            if x > lo {
                mu[a] = x;
                return;
            }
        }
        if k == 0 {
            mu[a] = 0.0;
            return;
        }
        if ok(lo) {
            mu[a] = lo;
            return;
        }
        hi = lo;
        k -= 1;
    }
}

/// One single-advertiser lowering pass over `group`; returns the moved
/// advertisers and the largest relative move.
fn descent_pass(inst: &DiscreteInstance, mu: &mut [f64], group: &[usize]) -> (Vec<usize>, f64) {
    let mut moved = Vec::new();
    let mut largest_step = 0.0f64;
    for &a in group {
        if !feasible_for(inst, mu, a) {
            let before = mu[a];
            lower_to_feasible(inst, mu, a);
            if mu[a] < before {
                moved.push(a);
                largest_step = largest_step.max((before - mu[a]) / before);
            }
        }
    }
    (moved, largest_step)
}

/// Advertisers in `group` that keep undercutting each other by a few ulps on
/// a tied query descend together along the ray `lambda * mu_group`, visiting
/// every point until the chase breaks. Along the ray, winner sets against
/// advertisers outside the group only change at finitely many crossings;
/// between crossings spends shrink with `lambda`, so the chase breaks at most
/// once per interval and bisection finds the break. The profile jumps to the
/// lowest point that still chases.
fn skip_chase(inst: &DiscreteInstance, mu: &mut [f64], group: &[usize]) {
    let scaled = |lambda: f64| {
        let mut p = mu.to_vec();
        for &a in group {
            p[a] *= lambda;
        }
        p
    };
    let all: Vec<usize> = (0..inst.n_advertisers()).collect();
    let chasing = |lambda: f64| {
        let mut p = scaled(lambda);
        let mut seen = Vec::new();
        for _ in 0..2 * CHASE_WINDOW {
            let (moved, step) = descent_pass(inst, &mut p, &all);
            if moved.is_empty() || step >= CHASE_STEP || moved.iter().any(|a| !group.contains(a)) {
                return false;
            }
            seen.extend(moved);
        }
        seen.sort_unstable();
        seen.dedup();
        seen == group
    };
    let mut crossings = vec![0.0];
    for &a in group {
        for o in (0..inst.n_advertisers()).filter(|o| !group.contains(o)) {
            for q in 0..inst.n_queries() {
                let own = mu[a] * inst.values[a][q];
                let t = mu[o] * inst.values[o][q] / own;
                if own > 0.0 && t > 0.0 && t < 1.0 {
                    crossings.push(t);
                }
            }
        }
    }
    crossings.sort_by(|x, y| y.total_cmp(x));
    crossings.dedup();
    let mut known = 1.0;
    for t in crossings {
        let x = (t * (1.0 + 1e-13)).max(t + 1e-300);
        if x >= known {
            continue;
        }
        if chasing(x) {
            known = x;
            continue;
        }
        let mut lo = x;
        while known - lo > 1e-15 * known {
            let mid = 0.5 * (lo + known);
            if mid <= lo || mid >= known {
                break;
            }
            if chasing(mid) {
                known = mid;
            } else {
                lo = mid;
            }
        }
        break;
    }
    let p = scaled(known);
    mu.copy_from_slice(&p);
}

/// Monotone descent from the cap: every violated advertiser is lowered to
/// its largest feasible multiplier until a full pass changes nothing.
pub fn solve_fppe(inst: &DiscreteInstance, cap: f64) -> Result<PacingSolution> {
    inst.validate()?;
    if !(cap.is_finite() && cap > 0.0) {
        return Err(Error::InvalidInstance(format!("cap {cap} must be finite and positive")));
    }
    let n = inst.n_advertisers();
    let mut mu = vec![cap; n];
    let all: Vec<usize> = (0..n).collect();
    let mut streak: Vec<usize> = Vec::new();
    let mut streak_len = 0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > MAX_ROUNDS {
            return Err(Error::NonConvergence {
                iterations: MAX_ROUNDS,
                detail: format!("pacing descent still moving at mu={mu:?}"),
            });
        }
        let (moved, largest_step) = descent_pass(inst, &mut mu, &all);
        if moved.is_empty() {
            break;
        }
        if largest_step >= CHASE_STEP {
            streak.clear();
            streak_len = 0;
            continue;
        }
        streak.extend(moved);
        streak_len += 1;
        if streak_len == CHASE_WINDOW {
            streak.sort_unstable();
            streak.dedup();
            skip_chase(inst, &mut mu, &streak);
            streak.clear();
            streak_len = 0;
        }
    }
    let out = outcome(inst, &mu);
    let certificates = (0..n)
        .map(|a| {
            if mu[a] >= cap {
                return Certificate::AtCap;
            }
            let mut up = mu.clone();
            up[a] = (mu[a] + RAISE_STEP).min(cap);
            let o = outcome(inst, &up);
            let slack_after = slack_of(&inst.constraints[a], &o, a);
            if inst.constraints[a].is_satisfied(o.spend[a], o.value[a]) {
                Certificate::Unblocked { slack_after }
            } else {
                Certificate::BlockedByConstraint { slack_after }
            }
        })
        .collect();
    Ok(PacingSolution {
        slacks: (0..n).map(|a| slack_of(&inst.constraints[a], &out, a)).collect(),
        tied_queries: (0..inst.n_queries()).filter(|&q| out.tied[q]).collect(),
        winner: out.winner,
        values: out.value,
        spends: out.spend,
        multipliers: mu,
        cap,
        certificates,
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacingProbeRow {
    pub report: f64,
    pub value: f64,
    pub spend: f64,
    pub multipliers: Vec<f64>,
    pub ties: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacingProbe {
    pub advertiser: usize,
    pub rows: Vec<PacingProbeRow>,
    /// `(i, i + 1)` row pairs where the probed value dropped.
    pub value_violations: Vec<(usize, usize)>,
    /// `(i, i + 1, advertiser)` where some multiplier dropped.
    pub multiplier_violations: Vec<(usize, usize, usize)>,
    pub pass: bool,
}

/// Solves the pacing equilibrium for each report of advertiser `a`'s budget
/// (or target) and checks that `a`'s value and every multiplier are
/// nondecreasing along the sweep.
pub fn fppe_monotonicity_probe(
    inst: &DiscreteInstance,
    a: usize,
    reports: &[f64],
    cap: f64,
) -> Result<PacingProbe> {
    if a >= inst.n_advertisers() {
        return Err(Error::InvalidInstance(format!("no advertiser {a}")));
    }
    if reports.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInstance("reports must be sorted ascending".into()));
    }
    let rows = reports
        .par_iter()
        .map(|&r| {
            let modified = inst.with_constraint(a, inst.constraints[a].with_report(r));
            let s = solve_fppe(&modified, cap)?;
            Ok(PacingProbeRow {
                report: r,
                value: s.values[a],
                spend: s.spends[a],
                ties: !s.tied_queries.is_empty(),
                multipliers: s.multipliers,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let drops = |x: f64, y: f64, tol: f64| y < x - tol * (1.0 + x.abs());
    let mut value_violations = Vec::new();
    let mut multiplier_violations = Vec::new();
    for (i, w) in rows.windows(2).enumerate() {
        if drops(w[0].value, w[1].value, MONEY_TOL) {
            value_violations.push((i, i + 1));
        }
        for b in 0..inst.n_advertisers() {
            if drops(w[0].multipliers[b], w[1].multipliers[b], 1e-9) {
                multiplier_violations.push((i, i + 1, b));
            }
        }
    }
    Ok(PacingProbe {
        advertiser: a,
        pass: value_violations.is_empty() && multiplier_violations.is_empty(),
        rows,
        value_violations,
        multiplier_violations,
    })
}
