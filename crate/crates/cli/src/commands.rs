//! Subcommand handlers: load inputs, call the library, print a summary and
//! write the requested artifacts.

use std::path::{Path, PathBuf};

use autobid_eq::aic::{g_hat, mhr_check, monotonicity_scan, cubic_counterexample, pointwise_gap, Verdict};
use autobid_eq::continuous::{
    curve_table, density_from_valuations, solve_equilibrium, verify_fpa_spa_equivalence, CurveKind, DensityF,
    EquilibriumSolution, ScanSpec, ValuationPair,
};
use autobid_eq::fppe::{default_cap, fppe_monotonicity_probe, solve_fppe};
use autobid_eq::model::{ConstraintProfile, UniformBidProfile};
use autobid_eq::numerics::log_space;
use autobid_eq::spa_discrete::{aic_probe_discrete_with, check_equilibrium, enumerate_equilibria, prefix_claim};
use autobid_eq::truthful::{aic_pricing_test, solve_truthful_equilibrium, validate_rule, AllocationRule, PricingCurve};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{num, write_json, Table};
use crate::scenario::{OutputSpec, Payload, Scenario, SolverOptions};
use crate::{
    AicScanArgs, ContinuousArgs, CounterexampleArgs, DiscreteArgs, FppeArgs, OutputArgs, ProbeArgs,
    SolveContinuousArgs, TruthfulArgs, VerifyArgs,
};

/// Output paths from flags, falling back to the scenario's.
fn outputs(flags: &OutputArgs, scenario: Option<&OutputSpec>) -> (Option<PathBuf>, Option<PathBuf>) {
    let from = |f: &Option<PathBuf>, s: Option<&PathBuf>| f.clone().or_else(|| s.cloned());
    (
        from(&flags.csv, scenario.and_then(|s| s.csv.as_ref())),
        from(&flags.json, scenario.and_then(|s| s.json.as_ref())),
    )
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    match path {
        Some(p) => write_json(p, value),
        None => Ok(()),
    }
}

fn pair(values: &[f64]) -> Result<[f64; 2], CliError> {
    match values {
        [a, b] => Ok([*a, *b]),
        _ => Err(CliError::validation(format!("expected two values, got {}", values.len()))),
    }
}

pub fn verify_discrete(args: VerifyArgs) -> Result<(), CliError> {
    let s = Scenario::load(&args.scenario)?;
    let inst = s.discrete()?;
    let claimed = match (args.claim, args.prefix) {
        (Some(c), _) => c,
        (None, Some(k)) => prefix_claim(inst, k)?,
        (None, None) => return Err(CliError::validation("give --claim or --prefix")),
    };
    let mu = pair(&args.mu)?;
    let rep = check_equilibrium(inst, &UniformBidProfile::new(mu.to_vec()), &claimed)?;
    for (a, adv) in rep.advertisers.iter().enumerate() {
        println!(
            "{}: spend {} value {} slack {} constraint {} best-response {}",
            inst.advertisers[a],
            adv.spend,
            adv.value,
            adv.slack,
            pass_word(adv.constraint_pass),
            pass_word(adv.best_response_pass)
        );
    }
    println!("allocation {}", pass_word(rep.allocation_pass));
    println!("verdict {}", pass_word(rep.verdict));
    let (_, json) = outputs(&args.out, Some(&s.output));
    emit_json(json.as_deref(), &rep)
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn solve_discrete(args: DiscreteArgs) -> Result<(), CliError> {
    let s = Scenario::load(&args.scenario)?;
    let inst = s.discrete()?;
    let bounds = args.bounds.unwrap_or(s.options.bounds);
    let eqs = enumerate_equilibria(inst, bounds.bounds(inst))?;
    let mut t = Table::new(&["k", "mu1", "mu2", "value1", "value2", "spend1", "spend2", "won_by_1", "tie_used"]);
    for e in &eqs {
        let won: Vec<String> = e.winners[0].iter().map(|q| (q + 1).to_string()).collect();
        println!(
            "k={} mu=({}, {}) values=({}, {}) spends=({}, {}) adv1 wins {{{}}}",
            e.k,
            e.witness.multipliers[0],
            e.witness.multipliers[1],
            e.values[0],
            e.values[1],
            e.spends[0],
            e.spends[1],
            won.join(",")
        );
        t.row([
            e.k.to_string(),
            num(e.witness.multipliers[0]),
            num(e.witness.multipliers[1]),
            num(e.values[0]),
            num(e.values[1]),
            num(e.spends[0]),
            num(e.spends[1]),
            won.join(" "),
            e.tie_used.to_string(),
        ]);
    }
    println!("{} equilibrium allocation(s)", eqs.len());
    let (csv, json) = outputs(&args.out, Some(&s.output));
    if let Some(p) = csv {
        t.save(&p)?;
    }
    emit_json(json.as_deref(), &eqs)
}

pub fn probe_discrete(args: ProbeArgs) -> Result<(), CliError> {
    let s = Scenario::load(&args.discrete.scenario)?;
    let inst = s.discrete()?;
    let choice = args.discrete.bounds.unwrap_or(s.options.bounds);
    let table = aic_probe_discrete_with(inst, args.advertiser, &args.reports, &|i| choice.bounds(i))?;
    let mut t = Table::new(&["report", "truthful", "equilibria", "worst_value", "best_value"]);
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for (row, truthful) in std::iter::once((&table.truth, true)).chain(table.rows.iter().map(|r| (r, false))) {
        println!(
            "report {}{}: {} equilibria, worst {}, best {}",
            row.report,
            if truthful { " (truthful)" } else { "" },
            row.values.len(),
            opt(row.worst),
            opt(row.best)
        );
        t.row([
            num(row.report),
            truthful.to_string(),
            row.values.len().to_string(),
            opt(row.worst),
            opt(row.best),
        ]);
    }
    println!(
        "misreport gains (worst vs worst): {}; (best vs best): {}",
        table.non_aic_worst, table.non_aic_best
    );
    let (csv, json) = outputs(&args.discrete.out, Some(&s.output));
    if let Some(p) = csv {
        t.save(&p)?;
    }
    emit_json(json.as_deref(), &table)
}

/// Resolved continuous input: density, constraints, options and the
/// scenario that reproduces it.
struct ContinuousInput {
    f: DensityF,
    constraints: [ConstraintProfile; 2],
    options: SolverOptions,
    scenario: Scenario,
}

fn continuous_input(args: &ContinuousArgs) -> Result<ContinuousInput, CliError> {
    let mut scenario = match (&args.scenario, &args.density) {
        (Some(p), _) => Scenario::load(p)?,
        (None, Some(d)) => {
            let constraints = match (&args.budgets, &args.targets) {
                (Some(b), _) => {
                    let [b1, b2] = pair(b)?;
                    [ConstraintProfile::budget(b1), ConstraintProfile::budget(b2)]
                }
                (None, Some(t)) => {
                    let [t1, t2] = pair(t)?;
                    [ConstraintProfile::target(t1), ConstraintProfile::target(t2)]
                }
                (None, None) => return Err(CliError::validation("give --budgets or --targets with --density")),
            };
            Scenario {
                payload: Payload::Density {
                    density: d.clone(),
                    constraints,
                },
                options: SolverOptions::default(),
                output: OutputSpec::default(),
            }
        }
        (None, None) => return Err(CliError::validation("give --scenario or --density")),
    };
    if args.scenario.is_some() && (args.budgets.is_some() || args.targets.is_some()) {
        let c = match (&args.budgets, &args.targets) {
            (Some(b), _) => pair(b).map(|[x, y]| [ConstraintProfile::budget(x), ConstraintProfile::budget(y)])?,
            (_, Some(t)) => pair(t).map(|[x, y]| [ConstraintProfile::target(x), ConstraintProfile::target(y)])?,
            _ => unreachable!(),
        };
        match &mut scenario.payload {
            Payload::Density { constraints, .. } | Payload::Continuous { constraints, .. } => *constraints = c,
            Payload::Discrete { .. } => {}
        }
    }
    if let Some(p) = args.points {
        scenario.options.points = p;
    }
    scenario.options.r_lo = args.r_lo.or(scenario.options.r_lo);
    scenario.options.r_hi = args.r_hi.or(scenario.options.r_hi);
    if let Some(p) = &args.out.csv {
        scenario.output.csv = Some(p.clone());
    }
    if let Some(p) = &args.out.json {
        scenario.output.json = Some(p.clone());
    }
    scenario.validate()?;
    if let Some(p) = &args.save_scenario {
        crate::output::write_atomic(p, scenario.to_json().as_bytes())?;
    }
    let (f, constraints) = scenario.continuous()?;
    Ok(ContinuousInput {
        f,
        constraints,
        options: scenario.options.clone(),
        scenario,
    })
}

const SOLUTION_HEADER: [&str; 10] =
    ["r", "mu1", "mu2", "value1", "value2", "spend1", "spend2", "residual1", "residual2", "degraded"];

fn solution_row(s: &EquilibriumSolution) -> [String; 10] {
    [
        num(s.r),
        num(s.mu1),
        num(s.mu2),
        num(s.value1),
        num(s.value2),
        num(s.spend1),
        num(s.spend2),
        num(s.residuals[0]),
        num(s.residuals[1]),
        s.degraded.to_string(),
    ]
}

fn print_solution(s: &EquilibriumSolution) {
    println!(
        "r={:.6} mu1={:.6} mu2={:.6} value1={:.6} value2={:.6} residual={:.2e}{}",
        s.r,
        s.mu1,
        s.mu2,
        s.value1,
        s.value2,
        s.max_residual(),
        if s.degraded { " (degraded)" } else { "" }
    );
}

fn report_solutions(
    solutions: &[EquilibriumSolution],
    diagnostic: Option<&str>,
    input: &ContinuousInput,
) -> Result<(), CliError> {
    for s in solutions {
        print_solution(s);
    }
    let mut t = Table::new(&SOLUTION_HEADER);
    for s in solutions {
        t.row(solution_row(s));
    }
    if let Some(p) = &input.scenario.output.csv {
        t.save(p)?;
    }
    emit_json(input.scenario.output.json.as_deref(), &solutions)?;
    if solutions.is_empty() {
        return Err(CliError::solver(diagnostic.unwrap_or("no equilibrium found").to_string()));
    }
    Ok(())
}

pub fn solve_continuous(args: SolveContinuousArgs) -> Result<(), CliError> {
    let input = continuous_input(&args.input)?;
    let [c1, c2] = input.constraints;
    let scan = input.options.scan();
    let set = solve_equilibrium(&input.f, &c1, &c2, &scan)?;
    if let Some(p) = &args.curve_csv {
        let mut t = Table::new(&["r", "ratio_curve", "value1", "value2"]);
        for row in curve_table(&input.f, set.kind, &scan.grid(&input.f)) {
            t.row([num(row.r), num(row.ratio_curve), num(row.value1), num(row.value2)]);
        }
        t.save(p)?;
    }
    report_solutions(&set.solutions, set.diagnostic.as_deref(), &input)
}

pub fn equivalence(args: ContinuousArgs) -> Result<(), CliError> {
    let input = continuous_input(&args)?;
    let [c1, c2] = input.constraints;
    let rep = verify_fpa_spa_equivalence(&input.f, &c1, &c2, &input.options.scan())?;
    let mut t = Table::new(&["format", "r", "mu1", "mu2", "value1", "value2", "spend1", "spend2"]);
    for (label, list) in [("first-price", &rep.first_price), ("second-price", &rep.second_price)] {
        for s in list.iter() {
            println!("{label}: r={:.9} mu1={:.9} mu2={:.9}", s.r, s.mu1, s.mu2);
            t.row([
                label.to_string(),
                num(s.r),
                num(s.mu1),
                num(s.mu2),
                num(s.value1),
                num(s.value2),
                num(s.spend1),
                num(s.spend2),
            ]);
        }
    }
    println!("max relative difference {:e}; agree {}", rep.max_rel_diff, rep.agree);
    if let Some(p) = &input.scenario.output.csv {
        t.save(p)?;
    }
    emit_json(input.scenario.output.json.as_deref(), &rep)?;
    if rep.first_price.is_empty() {
        return Err(CliError::solver("no equilibrium found"));
    }
    Ok(())
}

pub fn aic_scan(args: AicScanArgs) -> Result<(), CliError> {
    let (f, mut options, output) = match (&args.scenario, &args.density) {
        (Some(p), _) => {
            let s = Scenario::load(p)?;
            (s.continuous()?.0, s.options, s.output)
        }
        (None, Some(d)) => (d.build()?, SolverOptions::default(), OutputSpec::default()),
        (None, None) => return Err(CliError::validation("give --scenario or --density")),
    };
    if let Some(p) = args.points {
        options.points = p;
    }
    options.r_lo = args.r_lo.or(options.r_lo);
    options.r_hi = args.r_hi.or(options.r_hi);
    options.validate()?;
    let v = monotonicity_scan(&f, args.kind.into(), &options.scan())?;
    let mut t = Table::new(&["r", "curve", "slope", "rising"]);
    for s in &v.samples {
        t.row([num(s.r), num(s.curve), num(s.slope), s.rising.to_string()]);
    }
    println!("verdict {:?}", v.verdict);
    if let Some((lo, hi)) = v.rising_interval {
        println!("curve rises on r in ({lo:.6}, {hi:.6})");
    }
    if let Some(d) = &v.demo {
        println!(
            "raising B1/B2 from {:.6} to {:.6} moves r {:.6} -> {:.6} and lowers value1 {:.6} -> {:.6}",
            d.report_before, d.report_after, d.before.r, d.after.r, d.before.value1, d.after.value1
        );
    }
    if let Some(h) = &v.hint {
        println!("hint: {h}");
    }
    let (csv, json) = outputs(&args.out, Some(&output));
    if let Some(p) = csv {
        t.save(&p)?;
    }
    emit_json(json.as_deref(), &v)
}

#[derive(Serialize)]
struct CounterexampleReport {
    c: f64,
    argmin: f64,
    variant: String,
    from_g: Result<f64, String>,
    from_valuations: f64,
    roundtrip: f64,
    mhr_pass: bool,
    budget_verdict: Verdict,
    rising_interval: Option<(f64, f64)>,
}

pub fn counterexample(args: CounterexampleArgs) -> Result<(), CliError> {
    let ce = cubic_counterexample();
    let variant = args.variant.into();
    let vp = ValuationPair::tan_construction(&ce.f, variant);
    let check: Vec<f64> = (0..=98).map(|i| 0.1 + 0.05 * i as f64).collect();
    let from_valuations = density_from_valuations(&vp)
        .map(|fv| pointwise_gap(&ce.f, &|r| fv.eval(r), &check))
        .unwrap_or(f64::INFINITY);
    let mhr = mhr_check(&ce.f, &log_space(0.01, 20.0, 400));
    let scan = monotonicity_scan(&ce.f, CurveKind::Budget, &ScanSpec::default())?;
    let rep = CounterexampleReport {
        c: ce.c,
        argmin: ce.argmin,
        variant: format!("{variant:?}").to_lowercase(),
        from_g: ce.cross.from_g.clone(),
        from_valuations,
        roundtrip: ce.cross.roundtrip,
        mhr_pass: mhr.pass,
        budget_verdict: scan.verdict,
        rising_interval: scan.rising_interval,
    };
    println!("c = {:.10} at r = {:.10}", rep.c, rep.argmin);
    match &rep.from_g {
        Ok(gap) => println!("f from g: max relative gap {gap:e}"),
        Err(e) => println!("f from g: refused ({e})"),
    }
    println!("f from {} valuations: max relative gap {:e}", rep.variant, rep.from_valuations);
    println!("roundtrip |ghat - g| max {:e}", rep.roundtrip);
    println!("hazard rate monotone: {}", rep.mhr_pass);
    println!("budget scan: {:?} {:?}", rep.budget_verdict, rep.rising_interval);
    if let Some(p) = &args.out.csv {
        let mut t = Table::new(&["r", "f", "g", "ghat"]);
        for &r in &log_space(0.05, 10.0, 400) {
            t.row([num(r), num(ce.f.eval(r)), num(ce.g.eval(r)), num(g_hat(&ce.f, r))]);
        }
        t.save(p)?;
    }
    emit_json(args.out.json.as_deref(), &rep)
}

fn parse_rule(spec: &str) -> Result<AllocationRule, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let arg = |i: usize| -> Result<f64, CliError> {
        parts
            .get(i)
            .ok_or_else(|| CliError::validation(format!("rule '{spec}' is missing a parameter")))?
            .parse::<f64>()
            .map_err(|e| CliError::validation(format!("rule '{spec}': {e}")))
    };
    match (parts[0], parts.len()) {
        ("spa-step", 1) => Ok(AllocationRule::spa_step()),
        ("spa-step", 2) => Ok(AllocationRule::spa_step_with_tie(arg(1)?)),
        ("logistic", 2) => Ok(AllocationRule::logistic_power(arg(1)?)?),
        _ => Err(CliError::validation(format!(
            "unknown rule '{spec}' (expected spa-step, spa-step:TIE or logistic:K)"
        ))),
    }
}

pub fn truthful(args: TruthfulArgs) -> Result<(), CliError> {
    let rule = parse_rule(&args.rule)?;
    let [lo, hi, n] = [args.delta_grid[0], args.delta_grid[1], args.delta_grid[2]];
    if !(lo > 0.0 && hi > lo && n >= 2.0 && n.fract() == 0.0) {
        return Err(CliError::validation("delta grid needs 0 < LO < HI and an integer N >= 2"));
    }
    let grid = log_space(lo, hi, n as usize);
    let report = validate_rule(&rule, &grid);
    if !report.pass {
        return Err(CliError::validation(format!("rule fails validation: {}", report.violations.join("; "))));
    }
    let pricing = aic_pricing_test(&PricingCurve::Rule(rule.clone()), &grid);
    println!(
        "pricing test: largest |p(b) - b p(1/b)| = {:.6} at b = {:.6}; equality {}",
        pricing.gap.abs(),
        pricing.b_star,
        if pricing.equality_holds { "holds" } else { "fails (not AIC)" }
    );
    if let Some(p) = &args.delta_csv {
        let mut t = Table::new(&["b", "delta"]);
        for (b, d) in &pricing.samples {
            t.row([num(*b), num(*d)]);
        }
        t.save(p)?;
    }
    let input = continuous_input(&args.input)?;
    let [c1, c2] = input.constraints;
    let set = solve_truthful_equilibrium(&input.f, &rule, &c1, &c2, &input.options.scan())?;
    report_solutions(&set.solutions, set.diagnostic.as_deref(), &input)
}

#[derive(Serialize)]
struct FppeReport {
    solution: autobid_eq::fppe::PacingSolution,
    probe: Option<autobid_eq::fppe::PacingProbe>,
}

pub fn fppe(args: FppeArgs) -> Result<(), CliError> {
    let s = Scenario::load(&args.scenario)?;
    let inst = s.discrete()?;
    let cap = args.cap.or(s.options.cap).unwrap_or_else(|| default_cap(inst));
    if !(cap.is_finite() && cap > 0.0) {
        return Err(CliError::validation(format!("cap {cap} must be finite and positive")));
    }
    let sol = solve_fppe(inst, cap)?;
    let mut t = Table::new(&["advertiser", "multiplier", "value", "spend", "slack", "certificate"]);
    for a in 0..inst.n_advertisers() {
        let cert = serde_json::to_string(&sol.certificates[a]).expect("certificate serializes");
        println!(
            "{}: mu={} value={} spend={} slack={} {}",
            inst.advertisers[a], sol.multipliers[a], sol.values[a], sol.spends[a], sol.slacks[a], cert
        );
        t.row([
            inst.advertisers[a].clone(),
            num(sol.multipliers[a]),
            num(sol.values[a]),
            num(sol.spends[a]),
            num(sol.slacks[a]),
            cert,
        ]);
    }
    let probe = match (args.probe_advertiser, &args.reports) {
        (Some(a), Some(reports)) => {
            let mut reports = reports.clone();
            reports.sort_by(f64::total_cmp);
            let p = fppe_monotonicity_probe(inst, a, &reports, cap)?;
            for row in &p.rows {
                println!("report {}: value {} multipliers {:?}", row.report, row.value, row.multipliers);
            }
            println!(
                "monotone: {} ({} value drops, {} multiplier drops)",
                p.pass,
                p.value_violations.len(),
                p.multiplier_violations.len()
            );
            Some(p)
        }
        _ => None,
    };
    let (csv, json) = outputs(&args.out, Some(&s.output));
    if let Some(p) = csv {
        t.save(&p)?;
    }
    emit_json(json.as_deref(), &FppeReport { solution: sol, probe })
}
