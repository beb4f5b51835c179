//! Ratio curves, multi-root equilibrium solving and the second-price
//! cross-check for two advertisers in the continuous model.
//!
//! Convention: `r = mu2 / mu1`. Advertiser 1 wins every `z >= r` and pays
//! `mu2` per unit of `f`-mass; advertiser 2 wins `z < r` and pays `mu1 z`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{DensityF, Moments};
use crate::error::{Error, Result};
use crate::model::{ConstraintKind, ConstraintProfile};
use crate::numerics::{bisect, brent, log_space, scan_sign_changes};

/// Which implicit equation to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    Budget,
    Tcpa,
}

/// Relative residual above which a solution is flagged degraded.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Log-spaced scan grid. Unset bounds default to half the lower and twice
/// the upper effective support endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub points: usize,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            points: 2048,
            lo: None,
            hi: None,
        }
    }
}

impl ScanSpec {
    pub fn with_points(points: usize) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    pub fn with_range(points: usize, lo: f64, hi: f64) -> Self {
        Self {
            points,
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn grid(&self, f: &DensityF) -> Vec<f64> {
        let (zl, zh) = f.effective_support();
        let lo = self.lo.unwrap_or(0.5 * zl.max(1e-300));
        let hi = self.hi.unwrap_or(2.0 * zh);
        log_space(lo, hi, self.points.max(2))
    }
}

impl Moments {
    /// `r S / M`; `+inf` when `M <= 0`.
    pub fn budget_curve(&self) -> f64 {
        if self.z_below > 0.0 {
            self.r * self.mass_above / self.z_below
        } else {
            f64::INFINITY
        }
    }

    /// `(r S / Z_above) (Below / M)`; `+inf` when a denominator is `<= 0`.
    pub fn tcpa_curve(&self) -> f64 {
        if self.z_above > 0.0 && self.z_below > 0.0 {
            (self.r * self.mass_above / self.z_above) * (self.mass_below / self.z_below)
        } else {
            f64::INFINITY
        }
    }

    pub fn curve(&self, kind: CurveKind) -> f64 {
        match kind {
            CurveKind::Budget => self.budget_curve(),
            CurveKind::Tcpa => self.tcpa_curve(),
        }
    }
}

/// Left side of the implicit equilibrium equation at `r`.
pub fn ratio_curve(f: &DensityF, kind: CurveKind, r: f64) -> f64 {
    f.moments(r).curve(kind)
}

/// One equilibrium of the two-advertiser continuous model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub r: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub value1: f64,
    pub value2: f64,
    pub spend1: f64,
    pub spend2: f64,
    /// Relative residuals `(spend - allowance) / allowance` per advertiser.
    pub residuals: [f64; 2],
    pub degraded: bool,
}

impl EquilibriumSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals[0].abs().max(self.residuals[1].abs())
    }
}

/// All roots found on a scan, ascending in `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub kind: CurveKind,
    pub target: f64,
    pub solutions: Vec<EquilibriumSolution>,
    /// Explanation when no root was found.
    pub diagnostic: Option<String>,
}

/// The shared constraint kind and the target ratio `B1/B2` or `T1/T2`.
pub fn homogeneous_target(c1: &ConstraintProfile, c2: &ConstraintProfile) -> Result<(CurveKind, f64)> {
    c1.validate()?;
    c2.validate()?;
    let (kind, a, b) = match (c1.kind(), c2.kind()) {
        (ConstraintKind::Budget, ConstraintKind::Budget) => {
            (CurveKind::Budget, c1.budget.unwrap_or(0.0), c2.budget.unwrap_or(0.0))
        }
        (ConstraintKind::Target, ConstraintKind::Target) => {
            (CurveKind::Tcpa, c1.target.unwrap_or(0.0), c2.target.unwrap_or(0.0))
        }
        _ => return Err(Error::MixedConstraints),
    };
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidInstance(format!(
            "constraint levels must be positive, got {a} and {b}"
        )));
    }
    Ok((kind, a / b))
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale != 0.0 {
        err / scale
    } else {
        err
    }
}

/// Multipliers, values, spends and residuals at threshold `r`, recovered
/// from the tight constraints.
pub fn recover(
    f: &DensityF,
    kind: CurveKind,
    c1: &ConstraintProfile,
    c2: &ConstraintProfile,
    r: f64,
) -> EquilibriumSolution {
    let m = f.moments(r);
    let (mu1, mu2) = match kind {
        CurveKind::Budget => {
            let mu1 = c2.budget.unwrap_or(0.0) / m.z_below;
            (mu1, mu1 * r)
        }
        CurveKind::Tcpa => {
            let mu2 = c1.target.unwrap_or(0.0) * m.z_above / m.mass_above;
            (mu2 / r, mu2)
        }
    };
    let (value1, value2) = (m.z_above, m.mass_below);
    let (spend1, spend2) = (mu2 * m.mass_above, mu1 * m.z_below);
    let (al1, al2) = (c1.allowance(value1), c2.allowance(value2));
    let residuals = [rel(spend1 - al1, al1), rel(spend2 - al2, al2)];
    let degraded = !residuals.iter().all(|x| x.abs() <= RESIDUAL_TOL) || !mu1.is_finite() || !mu2.is_finite();
    EquilibriumSolution {
        r,
        mu1,
        mu2,
        value1,
        value2,
        spend1,
        spend2,
        residuals,
        degraded,
    }
}

/// Roots of `ratio_curve(r) = B1/B2` (or `T1/T2`) on the scan grid, each
/// refined by bisection and turned into a full solution.
pub fn solve_equilibrium(
    f: &DensityF,
    c1: &ConstraintProfile,
    c2: &ConstraintProfile,
    scan: &ScanSpec,
) -> Result<EquilibriumSet> {
    let (kind, target) = homogeneous_target(c1, c2)?;
    f.validate()?;
    let grid = scan.grid(f);
    let resid = |r: f64| ratio_curve(f, kind, r) - target;
    let brackets = scan_sign_changes(resid, &grid);
    let mut roots: Vec<f64> = brackets
        .par_iter()
        .filter_map(|b| {
            let root = if b.lo == b.hi {
                b.lo
            } else {
                bisect(resid, b.lo, b.hi, 1e-13 * b.hi)?.x
            };
            // A sign change across a pole leaves a large residual.
            let res = resid(root);
            (res.abs() <= RESIDUAL_TOL * target).then_some(root)
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    let solutions: Vec<EquilibriumSolution> = roots.iter().map(|&r| recover(f, kind, c1, c2, r)).collect();
    let diagnostic = solutions.is_empty().then(|| {
        let curve: Vec<f64> = grid.iter().map(|&r| ratio_curve(f, kind, r)).filter(|c| c.is_finite()).collect();
        let lo = curve.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!(
            "no root of the {kind:?} curve for target {target} on [{}, {}]; attained range [{lo}, {hi}]",
            grid[0],
            grid[grid.len() - 1]
        )
    });
    Ok(EquilibriumSet {
        kind,
        target,
        solutions,
        diagnostic,
    })
}

/// Second-price characterization: `Phi(r) = 0` written without division,
/// solved with Brent's method, multipliers from advertiser 2's constraint.
fn solve_second_price(
    f: &DensityF,
    kind: CurveKind,
    c1: &ConstraintProfile,
    c2: &ConstraintProfile,
    grid: &[f64],
) -> Vec<EquilibriumSolution> {
    let phi = |r: f64| {
        let m = f.moments(r);
        match kind {
            CurveKind::Budget => {
                c2.budget.unwrap_or(0.0) * r * m.mass_above - c1.budget.unwrap_or(0.0) * m.z_below
            }
            CurveKind::Tcpa => {
                c2.target.unwrap_or(0.0) * m.mass_below * r * m.mass_above
                    - c1.target.unwrap_or(0.0) * m.z_above * m.z_below
            }
        }
    };
    // Drop grid points where either side carries no mass: Phi vanishes
    // identically there without being an equilibrium.
    let live: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&r| {
            let m = f.moments(r);
            m.z_below > 0.0 && m.mass_above > 0.0 && m.z_above > 0.0
        })
        .collect();
    let values: Vec<f64> = live.par_iter().map(|&r| phi(r)).collect();
    let mut roots = Vec::new();
    for i in 0..live.len().saturating_sub(1) {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            roots.push(live[i]);
        } else if a * b < 0.0 {
            if let Some(root) = brent(phi, live[i], live[i + 1], 1e-14 * live[i + 1]) {
                roots.push(root.x);
            }
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    roots
        .into_iter()
        .map(|r| {
            let m = f.moments(r);
            let mu1 = match kind {
                CurveKind::Budget => c2.budget.unwrap_or(0.0) / m.z_below,
                CurveKind::Tcpa => c2.target.unwrap_or(0.0) * m.mass_below / m.z_below,
            };
            let mu2 = mu1 * r;
            let (value1, value2) = (m.z_above, m.mass_below);
            let (spend1, spend2) = (mu2 * m.mass_above, mu1 * m.z_below);
            let (al1, al2) = (c1.allowance(value1), c2.allowance(value2));
            let residuals = [rel(spend1 - al1, al1), rel(spend2 - al2, al2)];
            EquilibriumSolution {
                r,
                mu1,
                mu2,
                value1,
                value2,
                spend1,
                spend2,
                degraded: !residuals.iter().all(|x| x.abs() <= RESIDUAL_TOL),
                residuals,
            }
        })
        .collect()
}

/// Both solver paths and the largest relative disagreement between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub first_price: Vec<EquilibriumSolution>,
    pub second_price: Vec<EquilibriumSolution>,
    pub max_rel_diff: f64,
    pub agree: bool,
}

/// Tolerance for [`verify_fpa_spa_equivalence`].
pub const EQUIVALENCE_TOL: f64 = 1e-8;

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Solves the first-price characterization with [`solve_equilibrium`] and
/// the second-price one with an independent formulation, then compares
/// `r`, multipliers, values and spends root by root.
pub fn verify_fpa_spa_equivalence(
    f: &DensityF,
    c1: &ConstraintProfile,
    c2: &ConstraintProfile,
    scan: &ScanSpec,
) -> Result<EquivalenceReport> {
    let first = solve_equilibrium(f, c1, c2, scan)?;
    let second = solve_second_price(f, first.kind, c1, c2, &scan.grid(f));
    let fp: Vec<EquilibriumSolution> = first.solutions.into_iter().filter(|s| !s.degraded).collect();
    let sp: Vec<EquilibriumSolution> = second.into_iter().filter(|s| !s.degraded).collect();
    let mut worst = 0.0f64;
    if fp.len() == sp.len() {
        for (a, b) in fp.iter().zip(&sp) {
            for (x, y) in [
                (a.r, b.r),
                (a.mu1, b.mu1),
                (a.mu2, b.mu2),
                (a.value1, b.value1),
                (a.value2, b.value2),
                (a.spend1, b.spend1),
                (a.spend2, b.spend2),
            ] {
                worst = worst.max(rel_diff(x, y));
            }
        }
    } else {
        worst = f64::INFINITY;
    }
    Ok(EquivalenceReport {
        agree: !fp.is_empty() && worst <= EQUIVALENCE_TOL,
        first_price: fp,
        second_price: sp,
        max_rel_diff: worst,
    })
}

/// Attained range of a ratio curve over the interior of the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub kind: CurveKind,
    pub range: (f64, f64),
    /// Intervals of `r` where the curve jumps without intermediate values.
    pub gaps: Vec<(f64, f64)>,
    /// Whether the curve reaches both `0+` and `+inf` (budget kind only).
    pub covers_all_positive: bool,
    pub pass: bool,
}

/// Scans the curve on `scan`'s grid, clipped to the effective support, and
/// bisects any large jump between neighbours to tell steep continuous
/// stretches from genuine discontinuities.
pub fn existence_check(f: &DensityF, kind: CurveKind, scan: &ScanSpec) -> Result<ExistenceReport> {
    f.validate()?;
    let (zl, zh) = f.effective_support();
    let mut grid: Vec<f64> = scan
        .grid(f)
        .into_iter()
        .filter(|&r| r > zl && r < zh)
        .collect();
    grid.insert(0, zl);
    grid.push(zh);
    if grid.len() < 2 {
        return Err(Error::InvalidInstance("scan grid misses the support".into()));
    }
    let curve = |r: f64| ratio_curve(f, kind, r);
    let vals: Vec<f64> = grid.par_iter().map(|&r| curve(r)).collect();
    let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut gaps = Vec::new();
    for i in 0..grid.len() - 1 {
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        let (mut fa, mut fb) = (vals[i], vals[i + 1]);
        if !fa.is_finite() || !fb.is_finite() {
            continue;
        }
        if (fa.ln() - fb.ln()).abs() < 0.5 {
            continue;
        }
        // Halve the cell, keeping the half with the bigger log-jump.
        let mut jump = (fa.ln() - fb.ln()).abs();
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let fm = curve(m);
            if !fm.is_finite() {
                break;
            }
            let (left, right) = ((fa.ln() - fm.ln()).abs(), (fm.ln() - fb.ln()).abs());
            if left >= right {
                b = m;
                fb = fm;
                jump = left;
            } else {
                a = m;
                fa = fm;
                jump = right;
            }
            if jump < 0.5 * 1e-3 {
                break;
            }
        }
        if jump >= 0.5 * 1e-3 {
            gaps.push((a, b));
        }
    }
    let covers_all_positive = kind == CurveKind::Budget && lo <= 1e-6 && hi >= 1e6;
    let pass = gaps.is_empty() && (kind == CurveKind::Tcpa || covers_all_positive);
    Ok(ExistenceReport {
        kind,
        range: (lo, hi),
        gaps,
        covers_all_positive,
        pass,
    })
}

/// One row of a curve dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub r: f64,
    pub ratio_curve: f64,
    pub value1: f64,
    pub value2: f64,
}

/// Curve values and equilibrium values along `grid`.
pub fn curve_table(f: &DensityF, kind: CurveKind, grid: &[f64]) -> Vec<CurveRow> {
    grid.par_iter()
        .map(|&r| {
            let m = f.moments(r);
            CurveRow {
                r,
                ratio_curve: m.curve(kind),
                value1: m.z_above,
                value2: m.mass_below,
            }
        })
        .collect()
}
