//! Shared domain types and exact outcome evaluation for per-query auctions
//! under uniform bidding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used for weak constraint comparisons on money amounts.
pub const MONEY_TOL: f64 = 1e-9;

/// Which kind of constraint an advertiser declares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    Budget,
    Target,
    Combined,
}

/// Budget `B` and/or target cost-per-value `T`; the combined form is
/// `spend <= B + T * value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

impl ConstraintProfile {
    pub fn budget(b: f64) -> Self {
        Self {
            budget: Some(b),
            target: None,
        }
    }

    pub fn target(t: f64) -> Self {
        Self {
            budget: None,
            target: Some(t),
        }
    }

    pub fn combined(b: f64, t: f64) -> Self {
        Self {
            budget: Some(b),
            target: Some(t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget.is_none() && self.target.is_none() {
            return Err(Error::InvalidInstance(
                "constraint needs a budget, a target, or both".into(),
            ));
        }
        for (name, v) in [("budget", self.budget), ("target", self.target)] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInstance(format!(
                        "{name} must be finite and nonnegative, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ConstraintKind {
        match (self.budget, self.target) {
            (Some(_), None) => ConstraintKind::Budget,
            (None, Some(_)) => ConstraintKind::Target,
            _ => ConstraintKind::Combined,
        }
    }

    /// Money the advertiser may spend after winning `value`.
    pub fn allowance(&self, value: f64) -> f64 {
        self.budget.unwrap_or(0.0) + self.target.unwrap_or(0.0) * value
    }

    /// `allowance(value) - spend`; nonnegative when the constraint holds.
    pub fn slack(&self, spend: f64, value: f64) -> f64 {
        self.allowance(value) - spend
    }

    /// Weak feasibility with a small relative tolerance.
    pub fn is_satisfied(&self, spend: f64, value: f64) -> bool {
        let allowance = self.allowance(value);
        spend <= allowance + MONEY_TOL * (1.0 + allowance.abs())
    }

    /// The same profile with the declared budget (or target, for target-only
    /// profiles) replaced by `report`.
    pub fn with_report(&self, report: f64) -> Self {
        match self.kind() {
            ConstraintKind::Target => Self::target(report),
            ConstraintKind::Budget => Self::budget(report),
            ConstraintKind::Combined => Self {
                budget: Some(report),
                target: self.target,
            },
        }
    }

    /// The value `with_report` would replace.
    pub fn reported_value(&self) -> f64 {
        match self.kind() {
            ConstraintKind::Target => self.target.unwrap_or(0.0),
            _ => self.budget.unwrap_or(0.0),
        }
    }
}

/// A finite query set with per-advertiser values and constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteInstance {
    pub advertisers: Vec<String>,
    /// `values[a][q]`: value to advertiser `a` of winning query `q`.
    pub values: Vec<Vec<f64>>,
    pub constraints: Vec<ConstraintProfile>,
}

impl DiscreteInstance {
    /// Builds and validates an instance. At least one advertiser is required;
    /// the second-price operations additionally require exactly two.
    pub fn new(
        advertisers: Vec<String>,
        values: Vec<Vec<f64>>,
        constraints: Vec<ConstraintProfile>,
    ) -> Result<Self> {
        let inst = Self {
            advertisers,
            values,
            constraints,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance with advertisers named `adv1`, `adv2`, ...
    pub fn with_default_ids(
        values: Vec<Vec<f64>>,
        constraints: Vec<ConstraintProfile>,
    ) -> Result<Self> {
        let ids = (1..=values.len()).map(|i| format!("adv{i}")).collect();
        Self::new(ids, values, constraints)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.advertisers.len();
        if n == 0 {
            return Err(Error::InvalidInstance("no advertisers".into()));
        }
        if self.values.len() != n || self.constraints.len() != n {
            return Err(Error::InvalidInstance(format!(
                "{n} advertisers but {} value rows and {} constraints",
                self.values.len(),
                self.constraints.len()
            )));
        }
        let q = self.values[0].len();
        if q == 0 {
            return Err(Error::InvalidInstance("no queries".into()));
        }
        for (a, row) in self.values.iter().enumerate() {
            if row.len() != q {
                return Err(Error::InvalidInstance(format!(
                    "value row {a} has {} entries, expected {q}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "value {v} for advertiser {a} is not finite and nonnegative"
                )));
            }
        }
        for c in &self.constraints {
            c.validate()?;
        }
        Ok(())
    }

    pub fn n_advertisers(&self) -> usize {
        self.advertisers.len()
    }

    pub fn n_queries(&self) -> usize {
        self.values[0].len()
    }

    pub fn value(&self, a: usize, q: usize) -> f64 {
        self.values[a][q]
    }

    /// Total value to `a` of the query set `qs`.
    pub fn set_value(&self, a: usize, qs: &[usize]) -> f64 {
        qs.iter().map(|&q| self.values[a][q]).fold(0.0, |s, v| s + v)
    }

    pub fn require_two(&self) -> Result<()> {
        if self.n_advertisers() != 2 {
            return Err(Error::Unsupported(format!(
                "exactly 2 advertisers required, got {}",
                self.n_advertisers()
            )));
        }
        Ok(())
    }

    /// Copy of the instance with advertiser `a`'s constraint replaced.
    pub fn with_constraint(&self, a: usize, c: ConstraintProfile) -> Self {
        let mut out = self.clone();
        out.constraints[a] = c;
        out
    }
}

/// One multiplier per advertiser; bids are `mu[a] * value[a][q]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBidProfile {
    pub multipliers: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

impl UniformBidProfile {
    pub fn new(multipliers: Vec<f64>) -> Self {
        Self {
            multipliers,
            cap: None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.multipliers.len() != n {
            return Err(Error::InvalidInstance(format!(
                "{} multipliers for {n} advertisers",
                self.multipliers.len()
            )));
        }
        let cap = self.cap.unwrap_or(f64::INFINITY);
        for &m in &self.multipliers {
            if !m.is_finite() || m < 0.0 || m > cap {
                return Err(Error::InvalidInstance(format!(
                    "multiplier {m} outside [0, {cap}]"
                )));
            }
        }
        Ok(())
    }

    pub fn bid(&self, inst: &DiscreteInstance, a: usize, q: usize) -> f64 {
        self.multipliers[a] * inst.values[a][q]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuctionFormat {
    Spa,
    Fpa,
}

/// How a query with several highest bids is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreakRule {
    /// The earliest listed advertiser among the tied wins.
    #[default]
    FavorListedOrder,
    /// Tied queries go to the first listed tied advertiser whose constraint
    /// still holds after buying the query; otherwise the first listed one.
    EndogenousOptimal,
    /// The query is shared equally among the tied advertisers.
    Split,
}

/// Allocation, prices and per-advertiser totals for one bid profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// `shares[q][a]`: fraction of query `q` allocated to `a`.
    pub shares: Vec<Vec<f64>>,
    /// Sole winner of each query, `None` when split.
    pub winner: Vec<Option<usize>>,
    /// Price per unit of query `q` charged to its winner(s).
    pub price: Vec<f64>,
    /// Queries where two or more bids tied for highest.
    pub tied: Vec<bool>,
    pub value: Vec<f64>,
    pub spend: Vec<f64>,
}

impl Outcome {
    /// Queries won outright by `a`.
    pub fn won_by(&self, a: usize) -> Vec<usize> {
        self.winner
            .iter()
            .enumerate()
            .filter(|(_, w)| **w == Some(a))
            .map(|(q, _)| q)
            .collect()
    }

    pub fn any_tie(&self) -> bool {
        self.tied.iter().any(|t| *t)
    }
}

/// Queries sorted by `value[a][q] / value[b][q]`, nonincreasing, with ties
/// kept in input order.
pub fn ratio_order(inst: &DiscreteInstance, a: usize, b: usize) -> Result<Vec<usize>> {
    let h = ratios(inst, a, b)?;
    let mut order: Vec<usize> = (0..inst.n_queries()).collect();
    order.sort_by(|&x, &y| h[y].total_cmp(&h[x]));
    Ok(order)
}

/// `h(q) = value[a][q] / value[b][q]` for every query.
pub fn ratios(inst: &DiscreteInstance, a: usize, b: usize) -> Result<Vec<f64>> {
    (0..inst.n_queries())
        .map(|q| {
            let d = inst.values[b][q];
            if d > 0.0 {
                Ok(inst.values[a][q] / d)
            } else {
                Err(Error::UndefinedRatio {
                    advertiser: b,
                    query: q,
                })
            }
        })
        .collect()
}

/// Runs the per-query auction for every query.
pub fn evaluate_outcome(
    inst: &DiscreteInstance,
    bids: &UniformBidProfile,
    auction: AuctionFormat,
    tiebreak: TieBreakRule,
) -> Result<Outcome> {
    let n = inst.n_advertisers();
    bids.validate(n)?;
    let nq = inst.n_queries();
    let mut out = Outcome {
        shares: vec![vec![0.0; n]; nq],
        winner: vec![None; nq],
        price: vec![0.0; nq],
        tied: vec![false; nq],
        value: vec![0.0; n],
        spend: vec![0.0; n],
    };
    let mut deferred = Vec::new();
    for q in 0..nq {
        let b: Vec<f64> = (0..n).map(|a| bids.bid(inst, a, q)).collect();
        let top = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let leaders: Vec<usize> = (0..n).filter(|&a| b[a] == top).collect();
        let price_for = |w: usize| match auction {
            AuctionFormat::Fpa => b[w],
            AuctionFormat::Spa => (0..n)
                .filter(|&o| o != w)
                .map(|o| b[o])
                .fold(0.0, f64::max),
        };
        out.tied[q] = leaders.len() > 1;
        if leaders.len() == 1 || tiebreak == TieBreakRule::FavorListedOrder {
            let w = leaders[0];
            assign(&mut out, inst, q, w, price_for(w));
        } else if tiebreak == TieBreakRule::Split {
            let share = 1.0 / leaders.len() as f64;
            let p = price_for(leaders[0]);
            out.price[q] = p;
            for &w in &leaders {
                out.shares[q][w] = share;
                out.value[w] += share * inst.values[w][q];
                out.spend[w] += share * p;
            }
        } else {
            let prices: Vec<f64> = leaders.iter().map(|&w| price_for(w)).collect();
            deferred.push((q, leaders, prices));
        }
    }
    // Endogenous ties are settled after all untied queries are known.
    for (q, leaders, prices) in deferred {
        let pick = (0..leaders.len())
            .find(|&i| {
                let w = leaders[i];
                inst.constraints[w]
                    .is_satisfied(out.spend[w] + prices[i], out.value[w] + inst.values[w][q])
            })
            .unwrap_or(0);
        assign(&mut out, inst, q, leaders[pick], prices[pick]);
    }
    Ok(out)
}

fn assign(out: &mut Outcome, inst: &DiscreteInstance, q: usize, w: usize, price: f64) {
    out.shares[q][w] = 1.0;
    out.winner[q] = Some(w);
    out.price[q] = price;
    out.value[w] += inst.values[w][q];
    out.spend[w] += price;
}

/// Splits `[0, 1]` into `n` equal cells and assigns each advertiser the
/// midpoint-rule integral of its value function over every cell.
pub fn discretize_continuous(
    v1: &dyn Fn(f64) -> f64,
    v2: &dyn Fn(f64) -> f64,
    n: usize,
    constraints: [ConstraintProfile; 2],
) -> Result<DiscreteInstance> {
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need at least 2 cells, got {n}")));
    }
    let width = 1.0 / n as f64;
    let mut rows = vec![Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let mid = (i as f64 + 0.5) * width;
        for (row, v) in rows.iter_mut().zip([v1, v2]) {
            let y = v(mid);
            if !y.is_finite() {
                return Err(Error::NonFinite { at: mid });
            }
            row.push(y * width);
        }
    }
    DiscreteInstance::with_default_ids(rows, constraints.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{table1, table2};

    #[test]
    fn table1_ratio_order() {
        let inst = table1(20.0, 49.0);
        assert_eq!(ratio_order(&inst, 0, 1).unwrap(), vec![0, 1, 2, 3]);
        let h = ratios(&inst, 0, 1).unwrap();
        for (got, want) in h.iter().zip([2.1, 2.0, 1.2, 0.2]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn table2_ratio_order() {
        let inst = table2(0.4, 0.7);
        assert_eq!(ratio_order(&inst, 0, 1).unwrap(), vec![0, 1, 2]);
        let h = ratios(&inst, 0, 1).unwrap();
        assert!((h[1] - 30.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_keep_input_order() {
        let inst = DiscreteInstance::with_default_ids(
            vec![vec![3.0, 1.0, 2.0], vec![3.0, 1.0, 2.0]],
            vec![ConstraintProfile::budget(1.0); 2],
        )
        .unwrap();
        assert_eq!(ratio_order(&inst, 0, 1).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn zero_competitor_value_is_undefined() {
        let inst = DiscreteInstance::with_default_ids(
            vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            vec![ConstraintProfile::budget(1.0); 2],
        )
        .unwrap();
        assert_eq!(
            ratio_order(&inst, 0, 1),
            Err(Error::UndefinedRatio {
                advertiser: 1,
                query: 1
            })
        );
    }

    #[test]
    fn table1_spa_spends() {
        let inst = table1(20.0, 49.0);
        let bids = UniformBidProfile::new(vec![0.7, 0.91]);
        let o = evaluate_outcome(&inst, &bids, AuctionFormat::Spa, TieBreakRule::default()).unwrap();
        assert_eq!(o.won_by(0), vec![0, 1]);
        assert_eq!(o.won_by(1), vec![2, 3]);
        assert!((o.spend[0] - 19.11).abs() < 1e-12);
        assert!((o.spend[1] - 35.0).abs() < 1e-12);
    }

    #[test]
    fn table1_deviation_spends() {
        let inst = table1(10.0, 49.0);
        let bids = UniformBidProfile::new(vec![1.0, 10.0 / 46.0]);
        let o = evaluate_outcome(&inst, &bids, AuctionFormat::Spa, TieBreakRule::default()).unwrap();
        assert_eq!(o.won_by(0), vec![0, 1, 2]);
        assert!((o.spend[0] - 10.0).abs() < 1e-12);
        assert!((o.spend[1] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn unopposed_bidder_pays_nothing() {
        let inst = table1(20.0, 49.0);
        let bids = UniformBidProfile::new(vec![0.0, 1.0]);
        let o = evaluate_outcome(&inst, &bids, AuctionFormat::Spa, TieBreakRule::default()).unwrap();
        assert_eq!(o.won_by(1), vec![0, 1, 2, 3]);
        assert_eq!(o.spend[1], 0.0);
    }

    #[test]
    fn fpa_charges_own_bid() {
        let inst = table1(20.0, 49.0);
        let bids = UniformBidProfile::new(vec![0.7, 0.91]);
        let o = evaluate_outcome(&inst, &bids, AuctionFormat::Fpa, TieBreakRule::default()).unwrap();
        assert!((o.spend[0] - 0.7 * 42.1).abs() < 1e-12);
        assert!((o.spend[1] - 0.91 * 125.0).abs() < 1e-12);
    }

    #[test]
    fn tie_rules() {
        let inst = DiscreteInstance::with_default_ids(
            vec![vec![1.0], vec![1.0]],
            vec![ConstraintProfile::budget(0.1), ConstraintProfile::budget(5.0)],
        )
        .unwrap();
        let bids = UniformBidProfile::new(vec![1.0, 1.0]);
        let listed = evaluate_outcome(&inst, &bids, AuctionFormat::Spa, TieBreakRule::FavorListedOrder).unwrap();
        assert_eq!(listed.winner[0], Some(0));
        assert!(listed.tied[0]);
        let endo = evaluate_outcome(&inst, &bids, AuctionFormat::Spa, TieBreakRule::EndogenousOptimal).unwrap();
        assert_eq!(endo.winner[0], Some(1));
        let split = evaluate_outcome(&inst, &bids, AuctionFormat::Spa, TieBreakRule::Split).unwrap();
        assert_eq!(split.shares[0], vec![0.5, 0.5]);
        assert_eq!(split.winner[0], None);
    }

    #[test]
    fn midpoint_discretization() {
        let c = [ConstraintProfile::budget(1.0); 2];
        let inst = discretize_continuous(&|q| q, &|_| 1.0, 2, c).unwrap();
        assert_eq!(inst.values[0], vec![0.125, 0.375]);
        assert_eq!(inst.values[1], vec![0.5, 0.5]);
        let inst = discretize_continuous(&|_| 1.0, &|_| 1.0, 4, c).unwrap();
        assert!(inst.values.iter().flatten().all(|&v| v == 0.25));
        assert!(discretize_continuous(&|q| 1.0 / (q - 0.25), &|_| 1.0, 4, c).is_err());
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(DiscreteInstance::with_default_ids(
            vec![vec![1.0, -1.0], vec![1.0, 1.0]],
            vec![ConstraintProfile::budget(1.0); 2]
        )
        .is_err());
        assert!(DiscreteInstance::with_default_ids(
            vec![vec![1.0], vec![1.0]],
            vec![ConstraintProfile { budget: None, target: None }; 2]
        )
        .is_err());
    }
}
