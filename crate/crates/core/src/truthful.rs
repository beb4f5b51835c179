//! Scale-invariant symmetric truthful auctions for two bidders: allocation
//! rules as functions of the bid ratio, Myerson payments, equilibria in the
//! continuous model, and the pricing identity any AIC rule would need.
//!
//! Convention: `r = mu2 / mu1` as in [`crate::continuous`]. At query `z`,
//! advertiser 1 bids `mu1 z` against `mu2`, so its bid ratio is `z / r`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::solve::{homogeneous_target, RESIDUAL_TOL};
use crate::continuous::{CurveKind, DensityF, EquilibriumSet, EquilibriumSolution, RealFn, ScanSpec};
use crate::error::{Error, Result};
use crate::model::ConstraintProfile;
use crate::numerics::{bisect, integrate, log_space, scan_sign_changes, CumulativeTable, QuadTol};

/// Family tag of an allocation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum RuleFamily {
    /// Highest bid wins; `tie` is the share at equal bids.
    SpaStep { tie: f64 },
    /// `z^k / (1 + z^k)`.
    LogisticPower { k: f64 },
    /// Linear interpolation through `(z, alloc)` samples, constant beyond.
    CustomSamples { points: Vec<(f64, f64)> },
    /// Arbitrary closure.
    Custom { label: String },
}

/// Win probability of bidder 1 as a function of the bid ratio `b1 / b2`.
#[derive(Clone)]
pub struct AllocationRule {
    pub family: RuleFamily,
    alloc: RealFn,
    /// Running integral of `alloc` on a log grid, for families without a
    /// closed form.
    cumulative: Option<Arc<CumulativeTable>>,
}

impl fmt::Debug for AllocationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AllocationRule").field("family", &self.family).finish()
    }
}

const TABLE_LO: f64 = 1e-8;
const TABLE_HI: f64 = 1e8;

impl AllocationRule {
    /// Second-price rule with share `1/2` at ties.
    pub fn spa_step() -> Self {
        Self::spa_step_with_tie(0.5)
    }

    pub fn spa_step_with_tie(tie: f64) -> Self {
        Self {
            family: RuleFamily::SpaStep { tie },
            alloc: Arc::new(move |z: f64| {
                if z > 1.0 {
                    1.0
                } else if z < 1.0 {
                    0.0
                } else {
                    tie
                }
            }),
            cumulative: None,
        }
    }

    /// `alloc(z) = z^k / (1 + z^k)`, `k > 0`.
    pub fn logistic_power(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInstance(format!("logistic power k={k} must be positive")));
        }
        let alloc: RealFn = Arc::new(move |z: f64| {
            if z <= 0.0 {
                0.0
            } else if z.is_infinite() {
                1.0
            } else {
                1.0 / (1.0 + z.powf(-k))
            }
        });
        let cumulative = (k != 1.0 && k != 2.0).then(|| Arc::new(table_for(&alloc)));
        Ok(Self {
            family: RuleFamily::LogisticPower { k },
            alloc,
            cumulative,
        })
    }

    /// Piecewise-linear rule through `points` (increasing `z`).
    pub fn custom_samples(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 || points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidInstance("custom rule needs 2+ samples with increasing z".into()));
        }
        let pts = points.clone();
        let alloc: RealFn = Arc::new(move |z: f64| {
            match pts.binary_search_by(|p| p.0.total_cmp(&z)) {
                Ok(i) => pts[i].1,
                Err(0) => pts[0].1,
                Err(i) if i == pts.len() => pts[pts.len() - 1].1,
                Err(i) => {
                    let (x0, y0) = pts[i - 1];
                    let (x1, y1) = pts[i];
                    y0 + (y1 - y0) * (z - x0) / (x1 - x0)
                }
            }
        });
        let cumulative = Some(Arc::new(table_for(&alloc)));
        Ok(Self {
            family: RuleFamily::CustomSamples { points },
            alloc,
            cumulative,
        })
    }

    pub fn from_fn(alloc: RealFn, label: impl Into<String>) -> Self {
        let cumulative = Some(Arc::new(table_for(&alloc)));
        Self {
            family: RuleFamily::Custom { label: label.into() },
            alloc,
            cumulative,
        }
    }

    pub fn alloc(&self, z: f64) -> f64 {
        (self.alloc)(z)
    }

    /// `A(b) = ∫_0^b alloc(w) dw`.
    pub fn cumulative(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        match &self.family {
            RuleFamily::SpaStep { .. } => (b - 1.0).max(0.0),
            RuleFamily::LogisticPower { k } if *k == 1.0 => b - b.ln_1p(),
            RuleFamily::LogisticPower { k } if *k == 2.0 => b - b.atan(),
            _ => {
                let table = self.cumulative.as_ref().expect("table built for this family");
                let alloc = &self.alloc;
                if b < TABLE_LO {
                    integrate(|w| alloc(w), 0.0, b, QuadTol::default()).value
                } else if b <= TABLE_HI {
                    table.eval(b).expect("inside table range")
                } else {
                    table.eval(TABLE_HI).expect("table end")
                        + integrate(|w| alloc(w), TABLE_HI, b, QuadTol::default()).value
                }
            }
        }
    }

    /// Myerson payment `p(b) = b alloc(b) - A(b)` against an opponent bid of 1.
    pub fn price(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        match self.family {
            RuleFamily::SpaStep { tie } => {
                if b > 1.0 {
                    1.0
                } else if b < 1.0 {
                    0.0
                } else {
                    tie
                }
            }
            _ => b * self.alloc(b) - self.cumulative(b),
        }
    }
}

/// `∫_0^b alloc` tabulated on `[TABLE_LO, TABLE_HI]`, offset by the exact
/// integral below the first knot.
fn table_for(alloc: &RealFn) -> CumulativeTable {
    let knots = log_space(TABLE_LO, TABLE_HI, 6001);
    let head = integrate(|w| alloc(w), 0.0, TABLE_LO, QuadTol::default()).value;
    let a = alloc.clone();
    let mut table = CumulativeTable::build(move |w| a(w), knots, QuadTol::default());
    table.shift(head);
    table
}

/// Payment curve `p(b)`: Myerson prices of a rule, or a synthetic curve.
#[derive(Clone)]
pub enum PricingCurve {
    Rule(AllocationRule),
    Synthetic { p: RealFn, label: String },
}

impl fmt::Debug for PricingCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rule(r) => write!(f, "PricingCurve::Rule({:?})", r.family),
            Self::Synthetic { label, .. } => write!(f, "PricingCurve::Synthetic({label})"),
        }
    }
}

impl PricingCurve {
    /// `p(b) = alpha (b + 1)`.
    pub fn affine(alpha: f64) -> Self {
        Self::Synthetic {
            p: Arc::new(move |b| alpha * (b + 1.0)),
            label: format!("{alpha}(b+1)"),
        }
    }

    pub fn price(&self, b: f64) -> f64 {
        match self {
            Self::Rule(r) => r.price(b),
            Self::Synthetic { p, .. } => p(b),
        }
    }
}

/// Myerson payment of bidder 1 at bid ratio `b`.
pub fn myerson_price(rule: &AllocationRule, b: f64) -> f64 {
    rule.price(b)
}

/// Result of [`validate_rule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub monotone: bool,
    pub zero_at_zero: bool,
    pub symmetric: bool,
    pub max_symmetry_error: f64,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Checks monotonicity, `alloc(0) = 0` and `alloc(z) + alloc(1/z) = 1` on
/// the grid (tolerance `1e-9`).
pub fn validate_rule(rule: &AllocationRule, grid: &[f64]) -> RuleReport {
    let mut violations = Vec::new();
    let vals: Vec<f64> = grid.iter().map(|&z| rule.alloc(z)).collect();
    let monotone = match vals.windows(2).position(|w| w[1] < w[0] - 1e-12) {
        Some(i) => {
            violations.push(format!("alloc decreases between z={} and z={}", grid[i], grid[i + 1]));
            false
        }
        None => true,
    };
    let zero_at_zero = rule.alloc(0.0) == 0.0;
    if !zero_at_zero {
        violations.push(format!("alloc(0) = {}", rule.alloc(0.0)));
    }
    let mut max_err = 0.0f64;
    let mut worst = 0.0;
    for &z in grid.iter().filter(|z| **z > 0.0) {
        let err = (rule.alloc(z) + rule.alloc(1.0 / z) - 1.0).abs();
        if err > max_err {
            max_err = err;
            worst = z;
        }
    }
    let symmetric = max_err <= 1e-9;
    if !symmetric {
        violations.push(format!(
            "alloc({worst}) + alloc({}) = {}",
            1.0 / worst,
            rule.alloc(worst) + rule.alloc(1.0 / worst)
        ));
    }
    RuleReport {
        monotone,
        zero_at_zero,
        symmetric,
        max_symmetry_error: max_err,
        pass: violations.is_empty(),
        violations,
    }
}

/// Spend and value integrals at threshold `r`, per unit of `mu1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthfulMoments {
    pub r: f64,
    /// `E[r p(z/r)]`
    pub pay1: f64,
    /// `E[z p(r/z)]`
    pub pay2: f64,
    /// `E[z alloc(z/r)]`
    pub value1: f64,
    /// `E[alloc(r/z)]`
    pub value2: f64,
}

impl TruthfulMoments {
    pub fn at(f: &DensityF, rule: &AllocationRule, r: f64) -> Self {
        let br = [r];
        Self {
            r,
            pay1: f.expectation(|z| r * rule.price(z / r), &br),
            pay2: f.expectation(|z| if z > 0.0 { z * rule.price(r / z) } else { 0.0 }, &br),
            value1: f.expectation(|z| z * rule.alloc(z / r), &br),
            value2: f.expectation(|z| if z > 0.0 { rule.alloc(r / z) } else { 0.0 }, &br),
        }
    }

    /// Left side of the implicit equation; `+inf` at degenerate points.
    pub fn curve(&self, kind: CurveKind) -> f64 {
        let base = if self.pay2 > 0.0 { self.pay1 / self.pay2 } else { f64::INFINITY };
        match kind {
            CurveKind::Budget => base,
            CurveKind::Tcpa => {
                if self.value1 > 0.0 {
                    base * self.value2 / self.value1
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Ratio curve of the truthful auction at `r`.
pub fn truthful_curve(f: &DensityF, rule: &AllocationRule, kind: CurveKind, r: f64) -> f64 {
    TruthfulMoments::at(f, rule, r).curve(kind)
}

fn recover_truthful(
    f: &DensityF,
    rule: &AllocationRule,
    kind: CurveKind,
    c1: &ConstraintProfile,
    c2: &ConstraintProfile,
    r: f64,
) -> EquilibriumSolution {
    let m = TruthfulMoments::at(f, rule, r);
    // Advertiser 2's constraint is tight: mu1 pay2 = B2 (or T2 value2).
    let mu1 = match kind {
        CurveKind::Budget => c2.budget.unwrap_or(0.0) / m.pay2,
        CurveKind::Tcpa => c2.target.unwrap_or(0.0) * m.value2 / m.pay2,
    };
    let mu2 = mu1 * r;
    // Advertiser 1's spend integrated directly in money units.
    let spend1 = f.expectation(|z| mu2 * rule.price(mu1 * z / mu2), &[r]);
    let spend2 = mu1 * m.pay2;
    let (al1, al2) = (c1.allowance(m.value1), c2.allowance(m.value2));
    let residuals = [(spend1 - al1) / al1, (spend2 - al2) / al2];
    EquilibriumSolution {
        r,
        mu1,
        mu2,
        value1: m.value1,
        value2: m.value2,
        spend1,
        spend2,
        degraded: !residuals.iter().all(|x| x.abs() <= RESIDUAL_TOL) || !mu1.is_finite(),
        residuals,
    }
}

/// Roots of the truthful-auction implicit equation on the scan grid, with
/// multipliers from advertiser 2's tight constraint.
pub fn solve_truthful_equilibrium(
    f: &DensityF,
    rule: &AllocationRule,
    c1: &ConstraintProfile,
    c2: &ConstraintProfile,
    scan: &ScanSpec,
) -> Result<EquilibriumSet> {
    let (kind, target) = homogeneous_target(c1, c2)?;
    f.validate()?;
    let report = validate_rule(rule, &log_space(1e-6, 1e6, 241));
    if !report.pass {
        return Err(Error::InvalidInstance(format!(
            "allocation rule fails validation: {}",
            report.violations.join("; ")
        )));
    }
    let grid = scan.grid(f);
    let resid = |r: f64| truthful_curve(f, rule, kind, r) - target;
    let brackets = scan_sign_changes(resid, &grid);
    let mut roots: Vec<f64> = brackets
        .par_iter()
        .filter_map(|b| {
            let root = if b.lo == b.hi { b.lo } else { bisect(resid, b.lo, b.hi, 1e-13 * b.hi)?.x };
            (resid(root).abs() <= RESIDUAL_TOL * target).then_some(root)
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let solutions: Vec<EquilibriumSolution> =
        roots.iter().map(|&r| recover_truthful(f, rule, kind, c1, c2, r)).collect();
    let diagnostic = solutions
        .is_empty()
        .then(|| format!("no root for target {target} on [{}, {}]", grid[0], grid[grid.len() - 1]));
    Ok(EquilibriumSet {
        kind,
        target,
        solutions,
        diagnostic,
    })
}

/// Result of [`aic_pricing_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTestReport {
    /// `(b, p(b) - b p(1/b))` on the grid.
    pub samples: Vec<(f64, f64)>,
    pub b_star: f64,
    pub gap: f64,
    pub equality_holds: bool,
}

/// Evaluates `Δ(b) = p(b) - b p(1/b)`. An AIC rule would need `Δ ≡ 0`; the
/// grid point with the largest `|Δ|` is returned as the witness.
pub fn aic_pricing_test(pricing: &PricingCurve, grid: &[f64]) -> PricingTestReport {
    let samples: Vec<(f64, f64)> = grid
        .iter()
        .filter(|b| **b > 0.0)
        .map(|&b| (b, pricing.price(b) - b * pricing.price(1.0 / b)))
        .collect();
    let (b_star, gap) = samples
        .iter()
        .copied()
        .fold((f64::NAN, 0.0f64), |acc, (b, d)| if d.abs() > acc.1.abs() { (b, d) } else { acc });
    let scale = samples.iter().map(|(b, _)| pricing.price(*b).abs()).fold(1.0f64, f64::max);
    PricingTestReport {
        equality_holds: gap.abs() <= 1e-9 * scale,
        samples,
        b_star,
        gap,
    }
}

/// Result of [`impossible_alloc_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpossibleAllocReport {
    pub alpha: f64,
    pub d: f64,
    /// `x(b) < 0` for every `b` below this point.
    pub negative_below: f64,
    /// `x(b) > 1` for every `b` above this point.
    pub above_one_beyond: f64,
    /// `(b, x(b))` reconstructed by integrating `p'(w) / w` from 1.
    pub samples: Vec<(f64, f64)>,
    pub negative_on_grid: bool,
    pub above_one_on_grid: bool,
}

/// Reconstructs the allocation implied by `p(b) = alpha (b + 1)` from
/// `x'(b) = p'(b) / b` and `x(1) = 1/2`, and reports where it leaves `[0, 1]`.
pub fn impossible_alloc_check(alpha: f64, grid: &[f64]) -> Result<ImpossibleAllocReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInstance(format!("alpha={alpha} must be positive")));
    }
    let d = 0.5;
    let pricing = PricingCurve::affine(alpha);
    let dp = |w: f64| {
        let h = 1e-6 * w.max(1e-12);
        (pricing.price(w + h) - pricing.price(w - h)) / (2.0 * h)
    };
    let samples: Vec<(f64, f64)> = grid
        .iter()
        .filter(|b| **b > 0.0)
        .map(|&b| (b, d + integrate(|w| dp(w) / w, 1.0, b, QuadTol::default()).value))
        .collect();
    Ok(ImpossibleAllocReport {
        alpha,
        d,
        negative_below: (-d / alpha).exp(),
        above_one_beyond: ((1.0 - d) / alpha).exp(),
        negative_on_grid: samples.iter().any(|s| s.1 < 0.0),
        above_one_on_grid: samples.iter().any(|s| s.1 > 1.0),
        samples,
    })
}
