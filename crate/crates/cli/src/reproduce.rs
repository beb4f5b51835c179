//! Canned recipes with printed checks and an overall verdict.

use std::path::Path;

use autobid_eq::aic::{cubic_constant, monotonicity_scan, cubic_counterexample};
use autobid_eq::continuous::{curve_table, ratio_curve, solve_equilibrium, CurveKind, ScanSpec};
use autobid_eq::fixtures::{table1, table2};
use autobid_eq::model::{ConstraintProfile, DiscreteInstance, UniformBidProfile};
use autobid_eq::spa_discrete::{aic_probe_discrete, check_equilibrium, prefix_claim};

use crate::error::CliError;
use crate::output::{num, Table};
use crate::Recipe;

#[derive(Default)]
struct Summary {
    failed: usize,
    total: usize,
}

impl Summary {
    fn check(&mut self, label: &str, ok: bool) {
        self.total += 1;
        if !ok {
            self.failed += 1;
        }
        println!("[{}] {label}", if ok { "ok" } else { "FAIL" });
    }

    fn close(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.check(&format!("{label} = {got} (expected {want} ± {tol:e})"), (got - want).abs() <= tol);
    }

    fn finish(self) -> Result<(), CliError> {
        let pass = self.failed == 0;
        println!("verdict: {} ({}/{} checks)", if pass { "PASS" } else { "FAIL" }, self.total - self.failed, self.total);
        if pass {
            Ok(())
        } else {
            Err(CliError::solver(format!("{} check(s) failed", self.failed)))
        }
    }
}

pub fn run(recipe: Recipe, csv: Option<&Path>) -> Result<(), CliError> {
    match recipe {
        Recipe::Table1 => table1_recipe(csv),
        Recipe::Table2 => table2_recipe(csv),
        Recipe::Fig2 => fig2(csv),
        Recipe::CConstant => c_constant(),
    }
}

/// Verifies the profile, prints spends and values, and optionally dumps a
/// per-advertiser table.
fn profile(
    s: &mut Summary,
    inst: &DiscreteInstance,
    mu: [f64; 2],
    k: usize,
    spends: [f64; 2],
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let claimed = prefix_claim(inst, k)?;
    let rep = check_equilibrium(inst, &UniformBidProfile::new(mu.to_vec()), &claimed)?;
    let mut t = Table::new(&["advertiser", "multiplier", "spend", "value", "slack"]);
    for (a, adv) in rep.advertisers.iter().enumerate() {
        println!("advertiser {}: mu={} spend={} value={}", a + 1, mu[a], adv.spend, adv.value);
        s.close(&format!("spend{}", a + 1), adv.spend, spends[a], 1e-9);
        t.row([(a + 1).to_string(), num(mu[a]), num(adv.spend), num(adv.value), num(adv.slack)]);
    }
    s.check("equilibrium verified", rep.verdict);
    if let Some(p) = csv {
        t.save(p)?;
    }
    Ok(())
}

fn table1_recipe(csv: Option<&Path>) -> Result<(), CliError> {
    let mut s = Summary::default();
    println!("budgets (20, 49), multipliers (0.7, 0.91)");
    let inst = table1(20.0, 49.0);
    profile(&mut s, &inst, [0.7, 0.91], 2, [19.11, 35.0], csv)?;
    let probe = aic_probe_discrete(&inst, 0, &[10.0])?;
    let truth = probe.truth.worst.unwrap_or(f64::NAN);
    let lie = probe.rows[0].worst.unwrap_or(f64::NAN);
    println!("advertiser 1 value: truthful B1=20 -> {truth}, reported B1=10 -> {lie}");
    s.close("truthful value", truth, 42.1, 1e-9);
    s.close("value after reporting 10", lie, 72.1, 1e-9);
    s.check("lower budget report pays off", probe.non_aic());
    s.finish()
}

fn table2_recipe(csv: Option<&Path>) -> Result<(), CliError> {
    let mut s = Summary::default();
    println!("targets (0.4, 0.7), multipliers (1.6, 1.2)");
    let inst = table2(0.4, 0.7);
    profile(&mut s, &inst, [1.6, 1.2], 2, [27.6, 32.0], csv)?;
    let dev = table2(0.6, 0.7);
    let probe = aic_probe_discrete(&dev, 0, &[0.4])?;
    let truth = probe.truth.worst.unwrap_or(f64::NAN);
    let lie = probe.rows[0].worst.unwrap_or(f64::NAN);
    println!("advertiser 1 value: truthful T1=0.6 -> {truth}, reported T1=0.4 -> {lie}");
    s.close("truthful value", truth, 40.0, 1e-9);
    s.close("value after reporting 0.4", lie, 70.0, 1e-9);
    s.check("lower target report pays off", probe.non_aic());
    s.finish()
}

fn fig2(csv: Option<&Path>) -> Result<(), CliError> {
    let mut s = Summary::default();
    let ce = cubic_counterexample();
    let scan = ScanSpec::default();
    let v = monotonicity_scan(&ce.f, CurveKind::Budget, &scan)?;
    if let Some(p) = csv {
        let mut t = Table::new(&["r", "ratio_curve", "value1", "value2"]);
        for row in curve_table(&ce.f, CurveKind::Budget, &scan.grid(&ce.f)) {
            t.row([num(row.r), num(row.ratio_curve), num(row.value1), num(row.value2)]);
        }
        t.save(p)?;
    }
    let Some((lo, hi)) = v.rising_interval else {
        s.check("budget curve has a rising stretch", false);
        return s.finish();
    };
    println!("budget curve rises on r in ({lo:.6}, {hi:.6})");
    s.check("budget curve has a rising stretch", true);
    let level = ratio_curve(&ce.f, CurveKind::Budget, hi) * (1.0 - 1e-3);
    let set = solve_equilibrium(&ce.f, &ConstraintProfile::budget(level), &ConstraintProfile::budget(1.0), &scan)?;
    let roots: Vec<_> = set.solutions.iter().filter(|x| !x.degraded).collect();
    for r in &roots {
        println!("B1/B2={level:.6}: r={:.6} value1={:.6} value2={:.6}", r.r, r.value1, r.value2);
    }
    s.check(&format!("{} equilibria at B1/B2={level:.6} (need >= 2)", roots.len()), roots.len() >= 2);
    let distinct = roots.windows(2).all(|w| (w[1].value1 - w[0].value1).abs() > 1e-9);
    s.check("equilibria give advertiser 1 distinct values", distinct);
    s.finish()
}

fn c_constant() -> Result<(), CliError> {
    let mut s = Summary::default();
    let (c, r) = cubic_constant();
    println!("c = {c:.10} (minimizer r = {r:.10})");
    s.close("c", c, 1.95105, 1e-4);
    s.finish()
}
