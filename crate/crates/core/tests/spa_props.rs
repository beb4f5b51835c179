use autobid_eq::fixtures::{table1, table2};
use autobid_eq::model::{ConstraintProfile, DiscreteInstance};
use autobid_eq::spa_discrete::{
    aic_probe_discrete, best_response_multiplier, check_equilibrium, enumerate_equilibria, prefix_claim,
    MultiplierBounds,
};
use proptest::prelude::*;

fn constraint() -> impl Strategy<Value = ConstraintProfile> {
    prop_oneof![
        (1.0f64..60.0).prop_map(ConstraintProfile::budget),
        (0.2f64..3.0).prop_map(ConstraintProfile::target),
        (1.0f64..20.0, 0.2f64..2.0).prop_map(|(b, t)| ConstraintProfile::combined(b, t)),
    ]
}

fn two_advertisers() -> impl Strategy<Value = DiscreteInstance> {
    (2usize..7).prop_flat_map(|m| {
        (
            prop::collection::vec(prop::collection::vec(0.5f64..50.0, m), 2),
            constraint(),
            constraint(),
        )
            .prop_map(|(values, c1, c2)| DiscreteInstance::with_default_ids(values, vec![c1, c2]).unwrap())
    })
}

/// Best value over every subset that some uniform multiplier can buy: the
/// subset must be a prefix of queries sorted by price / value.
fn uniform_brute_force(values: &[f64], prices: &[f64], c: &ConstraintProfile) -> (f64, f64) {
    let m = values.len();
    let (mut uniform, mut any) = (0.0f64, 0.0f64);
    for mask in 0u32..(1 << m) {
        let inside = |q: usize| mask & (1 << q) != 0;
        let spend: f64 = (0..m).filter(|&q| inside(q)).map(|q| prices[q]).sum();
        let value: f64 = (0..m).filter(|&q| inside(q)).map(|q| values[q]).sum();
        if !c.is_satisfied(spend, value) {
            continue;
        }
        any = any.max(value);
        let worst_in = (0..m).filter(|&q| inside(q)).map(|q| prices[q] / values[q]).fold(0.0, f64::max);
        let best_out = (0..m).filter(|&q| !inside(q)).map(|q| prices[q] / values[q]).fold(f64::INFINITY, f64::min);
        if worst_in < best_out {
            uniform = uniform.max(value);
        }
    }
    (uniform, any)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn enumerated_profiles_verify(inst in two_advertisers()) {
        for bounds in [MultiplierBounds::unrestricted(), MultiplierBounds::natural(&inst)] {
            for e in enumerate_equilibria(&inst, bounds).unwrap() {
                let claimed = prefix_claim(&inst, e.k).unwrap();
                let report = check_equilibrium(&inst, &e.witness, &claimed).unwrap();
                prop_assert!(report.verdict, "{:?}", report);
                prop_assert!(bounds.lo[0] <= e.witness.multipliers[0] && e.witness.multipliers[0] <= bounds.hi[0]);
            }
        }
    }

    #[test]
    fn best_response_matches_uniform_brute_force(
        values in prop::collection::vec(0.5f64..50.0, 1..7),
        seed in prop::collection::vec(0.1f64..40.0, 7),
        c in constraint(),
    ) {
        let m = values.len();
        let prices = &seed[..m];
        let inst = DiscreteInstance::with_default_ids(vec![values.clone()], vec![c]).unwrap();
        let br = best_response_multiplier(&inst, 0, prices).unwrap();
        let (uniform, any) = uniform_brute_force(&values, prices, &c);
        prop_assert!((br.value - uniform).abs() <= 1e-9 * (1.0 + uniform));
        if c.target.is_none() {
            // Greedy by bang-per-buck loses at most one item against the knapsack.
            let vmax = values.iter().copied().fold(0.0, f64::max);
            prop_assert!(any - br.value <= vmax + 1e-9);
        }
    }
}

#[test]
fn worked_tables_have_unique_allocations() {
    for inst in [table1(10.0, 49.0), table2(0.4, 0.7)] {
        let eqs = enumerate_equilibria(&inst, MultiplierBounds::natural(&inst)).unwrap();
        assert_eq!(eqs.len(), 1, "{inst:?}");
    }
}

#[test]
fn worked_tables_fail_monotonicity() {
    assert!(aic_probe_discrete(&table1(20.0, 49.0), 0, &[10.0]).unwrap().non_aic());
    assert!(aic_probe_discrete(&table2(0.6, 0.7), 0, &[0.4]).unwrap().non_aic());
}
