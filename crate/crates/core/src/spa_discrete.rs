//! Two-advertiser second-price equilibria with uniform bidding: verification,
//! greedy best responses, threshold enumeration and misreport probes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ratio_order, ratios, ConstraintKind, ConstraintProfile, DiscreteInstance, UniformBidProfile,
    MONEY_TOL,
};

/// Allocation check for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCheck {
    pub query: usize,
    pub claimed_winner: usize,
    pub pass: bool,
    /// The two bids were exactly equal; the claim relies on tie-breaking.
    pub tie: bool,
}

/// Constraint and best-response diagnostics for one advertiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvertiserCheck {
    pub spend: f64,
    pub value: f64,
    /// `allowance - spend`; must be nonnegative.
    pub slack: f64,
    pub constraint_pass: bool,
    /// Smallest `cost - allowance` over all larger query sets the advertiser
    /// could buy at current prices; must be strictly positive. `+inf` when
    /// there is nothing left to buy.
    pub best_response_margin: f64,
    /// Cost and allowance of the first blocked extension, if any.
    pub next_cost: Option<f64>,
    pub next_allowance: Option<f64>,
    pub best_response_pass: bool,
}

/// Outcome of the three equilibrium checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub allocation: Vec<QueryCheck>,
    pub advertisers: Vec<AdvertiserCheck>,
    pub allocation_pass: bool,
    pub constraint_pass: bool,
    pub best_response_pass: bool,
    pub verdict: bool,
}

/// Verifies that `bids` with the claimed winners form a second-price
/// equilibrium: the claimed winners have the highest bids, both
/// constraints hold at second prices, and neither advertiser can afford any
/// larger set of queries at the prices it currently faces.
pub fn check_equilibrium(
    inst: &DiscreteInstance,
    bids: &UniformBidProfile,
    claimed: &[usize],
) -> Result<EquilibriumReport> {
    inst.require_two()?;
    bids.validate(2)?;
    ratios(inst, 0, 1)?;
    ratios(inst, 1, 0)?;
    let nq = inst.n_queries();
    if claimed.len() != nq || claimed.iter().any(|&w| w > 1) {
        return Err(Error::InvalidInstance(
            "claimed allocation must name advertiser 0 or 1 for every query".into(),
        ));
    }
    let mu = &bids.multipliers;
    let allocation: Vec<QueryCheck> = (0..nq)
        .map(|q| {
            let w = claimed[q];
            let own = mu[w] * inst.values[w][q];
            let other = mu[1 - w] * inst.values[1 - w][q];
            QueryCheck {
                query: q,
                claimed_winner: w,
                pass: own >= other,
                tie: own == other,
            }
        })
        .collect();

    let advertisers: Vec<AdvertiserCheck> = (0..2)
        .map(|a| {
            let o = 1 - a;
            let price = |q: usize| mu[o] * inst.values[o][q];
            let won: Vec<usize> = (0..nq).filter(|&q| claimed[q] == a).collect();
            let spend: f64 = won.iter().map(|&q| price(q)).fold(0.0, |s, p| s + p);
            let value = inst.set_value(a, &won);
            let c = &inst.constraints[a];
            let slack = c.slack(spend, value);
            let constraint_pass = c.is_satisfied(spend, value);

            let mut rest: Vec<usize> = (0..nq)
                .filter(|&q| claimed[q] != a && inst.values[a][q] > 0.0)
                .collect();
            rest.sort_by(|&x, &y| {
                (inst.values[a][y] * price(x)).total_cmp(&(inst.values[a][x] * price(y)))
            });
            let mut margin = f64::INFINITY;
            let mut next = None;
            let (mut s, mut v) = (spend, value);
            for q in rest {
                s += price(q);
                v += inst.values[a][q];
                let allowance = c.allowance(v);
                if next.is_none() {
                    next = Some((s, allowance));
                }
                margin = margin.min(s - allowance);
            }
            AdvertiserCheck {
                spend,
                value,
                slack,
                constraint_pass,
                best_response_margin: margin,
                next_cost: next.map(|n| n.0),
                next_allowance: next.map(|n| n.1),
                best_response_pass: margin > 0.0,
            }
        })
        .collect();

    let allocation_pass = allocation.iter().all(|c| c.pass);
    let constraint_pass = advertisers.iter().all(|c| c.constraint_pass);
    let best_response_pass = advertisers.iter().all(|c| c.best_response_pass);
    Ok(EquilibriumReport {
        allocation,
        advertisers,
        allocation_pass,
        constraint_pass,
        best_response_pass,
        verdict: allocation_pass && constraint_pass && best_response_pass,
    })
}

/// Claimed allocation giving the first `k` queries in `h` order to
/// advertiser 0 and the rest to advertiser 1.
pub fn prefix_claim(inst: &DiscreteInstance, k: usize) -> Result<Vec<usize>> {
    let order = ratio_order(inst, 0, 1)?;
    let mut claim = vec![1; inst.n_queries()];
    for &q in order.iter().take(k) {
        claim[q] = 0;
    }
    Ok(claim)
}

/// Greedy best response of one advertiser to fixed per-query prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub multiplier: f64,
    /// Purchased queries in purchase order.
    pub won: Vec<usize>,
    pub spend: f64,
    pub value: f64,
    /// The last accepted and first rejected queries share a value-to-price
    /// ratio, so no multiplier separates them.
    pub tie: bool,
}

/// Buys queries in decreasing value-to-price order while the constraint
/// holds, stopping at the first query that would break it.
///
/// The returned multiplier lies midway between the bid thresholds of the
/// last accepted and first rejected query. When nothing can be bought the
/// multiplier is 0 and the set is empty.
pub fn best_response_multiplier(
    inst: &DiscreteInstance,
    a: usize,
    prices: &[f64],
) -> Result<BestResponse> {
    let nq = inst.n_queries();
    if prices.len() != nq || prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidInstance(
            "prices must be finite, nonnegative and one per query".into(),
        ));
    }
    best_response_to(&inst.values[a], &inst.constraints[a], prices)
}

pub(crate) fn best_response_to(
    values: &[f64],
    c: &ConstraintProfile,
    prices: &[f64],
) -> Result<BestResponse> {
    // Inverse ratio price / value is the smallest multiplier that wins q.
    let mut cands: Vec<(usize, f64)> = (0..values.len())
        .filter(|&q| values[q] > 0.0)
        .map(|q| (q, prices[q] / values[q]))
        .collect();
    cands.sort_by(|x, y| x.1.total_cmp(&y.1));

    let (mut spend, mut value) = (0.0, 0.0);
    let mut won = Vec::new();
    let mut rejected = None;
    for &(q, thr) in &cands {
        if c.is_satisfied(spend + prices[q], value + values[q]) {
            spend += prices[q];
            value += values[q];
            won.push(q);
        } else {
            rejected = Some(thr);
            break;
        }
    }
    let last = won.last().map(|&q| prices[q] / values[q]);
    let (multiplier, tie) = match (last, rejected) {
        (None, _) => (0.0, false),
        (Some(l), Some(r)) => (0.5 * (l + r), l == r),
        (Some(l), None) => (if l > 0.0 { 2.0 * l } else { 1.0 }, false),
    };
    Ok(BestResponse {
        multiplier,
        won,
        spend,
        value,
        tie,
    })
}

/// Allowed multiplier range per advertiser during enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierBounds {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl MultiplierBounds {
    pub fn unrestricted() -> Self {
        Self {
            lo: [0.0; 2],
            hi: [f64::INFINITY; 2],
        }
    }

    /// Budget-only bidders never bid above value (`mu <= 1`) and
    /// target-only bidders never bid below it (`mu >= 1`). Combined
    /// constraints are unrestricted.
    pub fn natural(inst: &DiscreteInstance) -> Self {
        let mut out = Self::unrestricted();
        for a in 0..2 {
            match inst.constraints[a].kind() {
                ConstraintKind::Budget => out.hi[a] = 1.0,
                ConstraintKind::Target => out.lo[a] = 1.0,
                ConstraintKind::Combined => {}
            }
        }
        out
    }
}

/// One threshold equilibrium found by enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEquilibrium {
    /// Advertiser 0 wins the first `k` queries in `h` order.
    pub k: usize,
    pub winners: [Vec<usize>; 2],
    pub values: [f64; 2],
    pub spends: [f64; 2],
    pub witness: UniformBidProfile,
    /// Feasible ranges for `mu2 / mu1`, `mu1` and `mu2`.
    pub ratio_range: (f64, f64),
    pub mu1_range: (f64, f64),
    pub mu2_range: (f64, f64),
    pub report: EquilibriumReport,
    pub tie_used: bool,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
    lo_open: bool,
    hi_open: bool,
}

impl Interval {
    fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    fn intersect(self, o: Self) -> Self {
        let (lo, lo_open) = if self.lo > o.lo {
            (self.lo, self.lo_open)
        } else if o.lo > self.lo {
            (o.lo, o.lo_open)
        } else {
            (self.lo, self.lo_open || o.lo_open)
        };
        let (hi, hi_open) = if self.hi < o.hi {
            (self.hi, self.hi_open)
        } else if o.hi < self.hi {
            (o.hi, o.hi_open)
        } else {
            (self.hi, self.hi_open || o.hi_open)
        };
        Self {
            lo,
            hi,
            lo_open,
            hi_open,
        }
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }

    /// An interior point: geometric midpoint when both ends are positive
    /// and finite.
    fn pick(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        match (self.lo > 0.0, self.hi.is_finite()) {
            (true, true) => (self.lo * self.hi).sqrt(),
            (false, true) => 0.5 * self.hi,
            (true, false) => 2.0 * self.lo,
            (false, false) => 1.0,
        }
    }
}

/// Enumerates threshold allocations (advertiser 0 takes the top `k` queries
/// by `h`) that admit a multiplier profile inside `bounds` satisfying every
/// equilibrium condition, with one verified witness per allocation.
pub fn enumerate_equilibria(
    inst: &DiscreteInstance,
    bounds: MultiplierBounds,
) -> Result<Vec<ThresholdEquilibrium>> {
    inst.require_two()?;
    let order = ratio_order(inst, 0, 1)?;
    ratios(inst, 1, 0)?;
    let nq = inst.n_queries();
    let v1: Vec<f64> = order.iter().map(|&q| inst.values[0][q]).collect();
    let v2: Vec<f64> = order.iter().map(|&q| inst.values[1][q]).collect();
    let h: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a / b).collect();
    let (c1, c2) = (&inst.constraints[0], &inst.constraints[1]);

    // Advertiser 0 holding the top j queries pays mu2 * C1(j) against
    // allowance A1(j); advertiser 1 holding the rest pays mu1 * C2(j).
    let pre = |v: &[f64], j: usize| -> f64 { v[..j].iter().fold(0.0, |s, x| s + x) };
    let suf = |v: &[f64], j: usize| -> f64 { v[j..].iter().fold(0.0, |s, x| s + x) };
    let a1 = |j: usize| c1.allowance(pre(&v1, j));
    let cost1 = |j: usize| pre(&v2, j);
    let a2 = |j: usize| c2.allowance(suf(&v2, j));
    let cost2 = |j: usize| suf(&v1, j);

    let mut found: Vec<ThresholdEquilibrium> = (0..=nq)
        .into_par_iter()
        .filter_map(|k| {
            // Constraint: mu2 <= A1(k)/C1(k); blocking: mu2 > A1(j)/C1(j), j > k.
            let mut mu2 = Interval::closed(bounds.lo[1], bounds.hi[1]);
            if cost1(k) > 0.0 {
                mu2 = mu2.intersect(Interval::closed(0.0, a1(k) / cost1(k)));
            } else if a1(k) < 0.0 {
                return None;
            }
            for j in k + 1..=nq {
                if cost1(j) > 0.0 {
                    mu2 = mu2.intersect(Interval {
                        lo: a1(j) / cost1(j),
                        hi: f64::INFINITY,
                        lo_open: true,
                        hi_open: false,
                    });
                } else {
                    return None;
                }
            }
            let mut mu1 = Interval::closed(bounds.lo[0], bounds.hi[0]);
            if cost2(k) > 0.0 {
                mu1 = mu1.intersect(Interval::closed(0.0, a2(k) / cost2(k)));
            }
            for j in 0..k {
                if cost2(j) > 0.0 {
                    mu1 = mu1.intersect(Interval {
                        lo: a2(j) / cost2(j),
                        hi: f64::INFINITY,
                        lo_open: true,
                        hi_open: false,
                    });
                } else {
                    return None;
                }
            }
            if mu1.is_empty() || mu2.is_empty() {
                return None;
            }
            // Strict separation of mu2/mu1 between h(k+1) and h(k).
            let h_hi = if k == 0 { f64::INFINITY } else { h[k - 1] };
            let h_lo = if k == nq { 0.0 } else { h[k] };
            let sep = Interval {
                lo: h_lo,
                hi: h_hi,
                lo_open: true,
                hi_open: true,
            };
            let reach = Interval {
                lo: if mu1.hi.is_finite() { mu2.lo / mu1.hi } else { 0.0 },
                hi: if mu1.lo > 0.0 { mu2.hi / mu1.lo } else { f64::INFINITY },
                lo_open: mu2.lo_open || mu1.hi_open,
                hi_open: mu2.hi_open || mu1.lo_open,
            };
            let ratio = sep.intersect(reach);
            if ratio.is_empty() {
                return None;
            }
            let rho = ratio.pick();
            let m1 = mu1.intersect(Interval {
                lo: mu2.lo / rho,
                hi: mu2.hi / rho,
                lo_open: mu2.lo_open,
                hi_open: mu2.hi_open,
            });
            if m1.is_empty() {
                return None;
            }
            let mu1_w = m1.pick();
            let witness = UniformBidProfile::new(vec![mu1_w, rho * mu1_w]);
            let claim = prefix_claim(inst, k).ok()?;
            let report = check_equilibrium(inst, &witness, &claim).ok()?;
            if !report.verdict {
                return None;
            }
            let winners = [order[..k].to_vec(), order[k..].to_vec()];
            Some(ThresholdEquilibrium {
                k,
                values: [report.advertisers[0].value, report.advertisers[1].value],
                spends: [report.advertisers[0].spend, report.advertisers[1].spend],
                winners,
                witness,
                ratio_range: (ratio.lo, ratio.hi),
                mu1_range: (mu1.lo, mu1.hi),
                mu2_range: (mu2.lo, mu2.hi),
                tie_used: report.allocation.iter().any(|c| c.tie),
                report,
            })
        })
        .collect();
    found.sort_by_key(|e| e.k);
    Ok(found)
}

/// Equilibrium values of the probed advertiser under one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub report: f64,
    pub values: Vec<f64>,
    pub worst: Option<f64>,
    pub best: Option<f64>,
}

/// Misreport sweep for one advertiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub advertiser: usize,
    pub truth: ProbeRow,
    pub rows: Vec<ProbeRow>,
    /// Some report's worst equilibrium value beats the truthful worst value.
    pub non_aic_worst: bool,
    /// Some report's best equilibrium value beats the truthful best value.
    pub non_aic_best: bool,
}

impl ProbeTable {
    pub fn non_aic(&self) -> bool {
        self.non_aic_worst
    }
}

fn probe_row(inst: &DiscreteInstance, a: usize, report: f64, bounds_of: &dyn Fn(&DiscreteInstance) -> MultiplierBounds) -> Result<ProbeRow> {
    let c = inst.constraints[a].with_report(report);
    let modified = inst.with_constraint(a, c);
    let eqs = enumerate_equilibria(&modified, bounds_of(&modified))?;
    let values: Vec<f64> = eqs.iter().map(|e| e.values[a]).collect();
    Ok(ProbeRow {
        report,
        worst: values.iter().copied().reduce(f64::min),
        best: values.iter().copied().reduce(f64::max),
        values,
    })
}

/// Replaces advertiser `a`'s budget (or target) by each report, enumerates
/// equilibria under natural multiplier bounds and compares the value `a`
/// receives against its truthful report.
pub fn aic_probe_discrete(
    inst: &DiscreteInstance,
    a: usize,
    reports: &[f64],
) -> Result<ProbeTable> {
    aic_probe_discrete_with(inst, a, reports, &MultiplierBounds::natural)
}

/// As [`aic_probe_discrete`] with caller-chosen multiplier bounds.
pub fn aic_probe_discrete_with(
    inst: &DiscreteInstance,
    a: usize,
    reports: &[f64],
    bounds_of: &(dyn Fn(&DiscreteInstance) -> MultiplierBounds + Sync),
) -> Result<ProbeTable> {
    inst.require_two()?;
    if a > 1 {
        return Err(Error::InvalidInstance(format!("no advertiser {a}")));
    }
    if let Some(r) = reports.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::InvalidInstance(format!("report {r} outside [0, inf)")));
    }
    let truth = probe_row(inst, a, inst.constraints[a].reported_value(), bounds_of)?;
    let rows = reports
        .par_iter()
        .map(|&r| probe_row(inst, a, r, bounds_of))
        .collect::<Result<Vec<_>>>()?;
    let beats = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => x > y + MONEY_TOL * (1.0 + y.abs()),
        _ => false,
    };
    let non_aic_worst = rows.iter().any(|r| beats(r.worst, truth.worst));
    let non_aic_best = rows.iter().any(|r| beats(r.best, truth.best));
    Ok(ProbeTable {
        advertiser: a,
        truth,
        rows,
        non_aic_worst,
        non_aic_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{table1, table2};

    fn ks(eqs: &[ThresholdEquilibrium]) -> Vec<usize> {
        eqs.iter().map(|e| e.k).collect()
    }

    #[test]
    fn table1_profile_passes() {
        let inst = table1(20.0, 49.0);
        let bids = UniformBidProfile::new(vec![0.7, 0.91]);
        let rep = check_equilibrium(&inst, &bids, &prefix_claim(&inst, 2).unwrap()).unwrap();
        assert!(rep.verdict, "{rep:?}");
        let adv1 = &rep.advertisers[0];
        assert!((adv1.slack - 0.89).abs() < 1e-12);
        assert!((adv1.next_cost.unwrap() - 41.86).abs() < 1e-12);
        assert!((rep.advertisers[1].next_cost.unwrap() - 63.0).abs() < 1e-12);
    }

    #[test]
    fn table1_high_ratio_fails_allocation() {
        let inst = table1(20.0, 49.0);
        let bids = UniformBidProfile::new(vec![0.7, 2.0]);
        let rep = check_equilibrium(&inst, &bids, &prefix_claim(&inst, 2).unwrap()).unwrap();
        assert!(!rep.allocation_pass);
        assert!(!rep.verdict);
    }

    #[test]
    fn table2_profile_passes() {
        let inst = table2(0.4, 0.7);
        let bids = UniformBidProfile::new(vec![1.6, 1.2]);
        let rep = check_equilibrium(&inst, &bids, &prefix_claim(&inst, 2).unwrap()).unwrap();
        assert!(rep.verdict, "{rep:?}");
        assert!((rep.advertisers[0].spend - 27.6).abs() < 1e-12);
        assert!((rep.advertisers[1].spend - 32.0).abs() < 1e-12);
    }

    #[test]
    fn table2_deviation_profile_passes() {
        let inst = table2(0.6, 0.7);
        let bids = UniformBidProfile::new(vec![1.0, 2.38]);
        let rep = check_equilibrium(&inst, &bids, &prefix_claim(&inst, 1).unwrap()).unwrap();
        assert!(rep.verdict, "{rep:?}");
        assert!((rep.advertisers[0].spend - 23.8).abs() < 1e-12);
    }

    #[test]
    fn three_advertisers_unsupported() {
        let inst = DiscreteInstance::with_default_ids(
            vec![vec![1.0]; 3],
            vec![ConstraintProfile::budget(1.0); 3],
        )
        .unwrap();
        let bids = UniformBidProfile::new(vec![1.0; 3]);
        assert!(matches!(
            check_equilibrium(&inst, &bids, &[0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn best_response_table1() {
        let inst = table1(20.0, 49.0);
        let prices: Vec<f64> = inst.values[1].iter().map(|v| 0.91 * v).collect();
        let br = best_response_multiplier(&inst, 0, &prices).unwrap();
        assert_eq!(br.won, vec![0, 1]);
        assert!((br.spend - 19.11).abs() < 1e-12);
        // q3 would cost 22.75 more; the multiplier sits between thresholds.
        assert!(br.multiplier * 40.0 > prices[1] && br.multiplier * 30.0 < prices[2]);
    }

    #[test]
    fn best_response_single_query() {
        let inst = DiscreteInstance::with_default_ids(
            vec![vec![1.0], vec![1.0]],
            vec![ConstraintProfile::budget(1.0); 2],
        )
        .unwrap();
        let br = best_response_multiplier(&inst, 0, &[0.5]).unwrap();
        assert_eq!(br.won, vec![0]);
        assert!(br.multiplier > 0.5);
    }

    #[test]
    fn best_response_table2_blocked_by_target() {
        let inst = table2(0.4, 0.7);
        let prices: Vec<f64> = inst.values[0].iter().map(|v| 1.6 * v).collect();
        let br = best_response_multiplier(&inst, 1, &prices).unwrap();
        assert_eq!(br.won, vec![2]);
    }

    #[test]
    fn best_response_infeasible() {
        let inst = table1(0.5, 49.0);
        let br = best_response_multiplier(&inst, 0, &[10.0; 4]).unwrap();
        assert_eq!(br.multiplier, 0.0);
        assert!(br.won.is_empty());
    }

    #[test]
    fn table1_uniqueness_at_budget_10() {
        let eqs = enumerate_equilibria(&table1(10.0, 49.0), MultiplierBounds::natural(&table1(10.0, 49.0))).unwrap();
        assert_eq!(ks(&eqs), vec![3]);
        assert_eq!(eqs[0].winners[0], vec![0, 1, 2]);
        assert!((eqs[0].values[0] - 72.1).abs() < 1e-9);
    }

    #[test]
    fn table1_budget_20_admits_two_allocations() {
        let inst = table1(20.0, 49.0);
        let eqs = enumerate_equilibria(&inst, MultiplierBounds::natural(&inst)).unwrap();
        assert_eq!(ks(&eqs), vec![2, 3]);
        let k2 = &eqs[0];
        // The worked profile lies inside the enumerated region.
        assert!(k2.mu1_range.0 < 0.7 && 0.7 <= k2.mu1_range.1);
        assert!(k2.mu2_range.0 < 0.91 && 0.91 <= k2.mu2_range.1);
    }

    #[test]
    fn table2_uniqueness() {
        let inst = table2(0.4, 0.7);
        let eqs = enumerate_equilibria(&inst, MultiplierBounds::natural(&inst)).unwrap();
        assert_eq!(ks(&eqs), vec![2]);
        assert!((eqs[0].values[0] - 70.0).abs() < 1e-9);
    }

    #[test]
    fn table1_probe_flags() {
        let t = aic_probe_discrete(&table1(20.0, 49.0), 0, &[10.0, 20.0]).unwrap();
        assert!(t.non_aic_worst);
        assert_eq!(t.rows[0].worst, Some(72.1));
        assert!((t.truth.worst.unwrap() - 42.1).abs() < 1e-9);
    }

    #[test]
    fn table2_probe_flags() {
        let t = aic_probe_discrete(&table2(0.6, 0.7), 0, &[0.4, 0.6]).unwrap();
        assert!(t.non_aic_worst);
        assert!((t.rows[0].worst.unwrap() - 70.0).abs() < 1e-9);
        assert!((t.truth.worst.unwrap() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn truthful_only_probe_never_flags() {
        let t = aic_probe_discrete(&table1(20.0, 49.0), 0, &[20.0]).unwrap();
        assert!(!t.non_aic_worst && !t.non_aic_best);
    }
}
