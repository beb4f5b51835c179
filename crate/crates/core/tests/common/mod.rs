//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use autobid_eq::model::{ConstraintProfile, DiscreteInstance};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const STEP: f64 = 0.01;

pub fn random_fppe_instance(rng: &mut ChaCha8Rng) -> DiscreteInstance {
    let n = rng.gen_range(2..=3);
    let m = rng.gen_range(2..=5);
    let values = (0..n).map(|_| (0..m).map(|_| rng.gen_range(0.1..1.0)).collect()).collect();
    let cons = (0..n)
        .map(|_| match rng.gen_range(0..3) {
            0 => ConstraintProfile::budget(rng.gen_range(0.1..1.5)),
            1 => ConstraintProfile::target(rng.gen_range(0.3..1.2)),
            _ => ConstraintProfile::combined(rng.gen_range(0.05..0.5), rng.gen_range(0.3..1.2)),
        })
        .collect();
    DiscreteInstance::with_default_ids(values, cons).unwrap()
}

pub fn all_feasible(inst: &DiscreteInstance, mu: &[f64]) -> bool {
    let n = inst.n_advertisers();
    let mut spend = [0.0; 3];
    let mut value = [0.0; 3];
    for q in 0..inst.n_queries() {
        let mut w = 0;
        for a in 1..n {
            if mu[a] * inst.values[a][q] > mu[w] * inst.values[w][q] {
                w = a;
            }
        }
        spend[w] += mu[w] * inst.values[w][q];
        value[w] += inst.values[w][q];
    }
    (0..n).all(|a| spend[a] <= inst.constraints[a].allowance(value[a]) + 1e-12)
}

/// Component-wise maximum over all feasible grid profiles.
pub fn grid_maximum(inst: &DiscreteInstance, cap: f64) -> Vec<f64> {
    let n = inst.n_advertisers();
    let k = (cap / STEP).round() as usize;
    let total = (k + 1).pow(n as u32);
    (0..total)
        .into_par_iter()
        .filter_map(|mut idx| {
            let mut mu = [0.0; 3];
            for m in mu.iter_mut().take(n) {
                *m = (idx % (k + 1)) as f64 * STEP;
                idx /= k + 1;
            }
            all_feasible(inst, &mu[..n]).then_some(mu)
        })
        .reduce(|| [0.0; 3], |a, b| [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])])[..n]
        .to_vec()
}

/// Supremum of the feasible set, enumerating every winner assignment. For a
/// fixed assignment the constraints are upper bounds `mu_a <= T_a + B_a / V_a`
/// and ratio bounds `mu_o <= mu_w v_w(q) / v_o(q)`, whose greatest solution
/// follows from relaxing the bounds along the ratio edges.
pub fn assignment_supremum(inst: &DiscreteInstance, cap: f64) -> Vec<f64> {
    let n = inst.n_advertisers();
    let m = inst.n_queries();
    let mut best = vec![0.0; n];
    for mut code in 0..n.pow(m as u32) {
        let winners: Vec<usize> = (0..m)
            .map(|_| {
                let w = code % n;
                code /= n;
                w
            })
            .collect();
        let mut mu: Vec<f64> = (0..n)
            .map(|a| {
                let v: f64 = (0..m).filter(|&q| winners[q] == a).map(|q| inst.values[a][q]).sum();
                let c = inst.constraints[a];
                if v > 0.0 {
                    cap.min(c.target.unwrap_or(0.0) + c.budget.unwrap_or(0.0) / v)
                } else {
                    cap
                }
            })
            .collect();
        for _ in 0..500 {
            let mut changed = false;
            for q in 0..m {
                let w = winners[q];
                for o in (0..n).filter(|&o| o != w) {
                    let bound = mu[w] * inst.values[w][q] / inst.values[o][q];
                    if bound < mu[o] {
                        mu[o] = bound;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for a in 0..n {
            best[a] = f64::max(best[a], mu[a]);
        }
    }
    best
}

/// Largest cross-advertiser value ratio `v_o(q) / v_a(q)`: how far one
/// grid step in another multiplier can move an advertiser's win threshold.
pub fn threshold_gain(inst: &DiscreteInstance) -> f64 {
    let n = inst.n_advertisers();
    let mut k: f64 = 1.0;
    for q in 0..inst.n_queries() {
        for a in 0..n {
            for o in 0..n {
                k = k.max(inst.values[o][q] / inst.values[a][q]);
            }
        }
    }
    k
}

/// Densities with a nondecreasing hazard rate: exponential, gamma with shape
/// at least one, and nondecreasing piecewise-linear on a bounded support.
pub fn random_mhr_density(rng: &mut ChaCha8Rng) -> autobid_eq::continuous::DensityF {
    use autobid_eq::continuous::DensityF;
    match rng.gen_range(0..3) {
        0 => DensityF::exponential(rng.gen_range(0.2..5.0)).unwrap(),
        1 => DensityF::gamma(rng.gen_range(1.0..6.0), rng.gen_range(0.5..4.0)).unwrap(),
        _ => {
            let n = rng.gen_range(2..6);
            let mut z = 0.0;
            let mut y = rng.gen_range(0.0..1.0);
            let mut pts = vec![(z, y)];
            for _ in 0..n {
                z += rng.gen_range(0.1..2.0);
                y += rng.gen_range(0.0..1.0);
                pts.push((z, y));
            }
            DensityF::piecewise_linear(&pts).unwrap()
        }
    }
}

/// A density from a small family with closed-form-friendly moments.
pub fn random_density(rng: &mut ChaCha8Rng) -> autobid_eq::continuous::DensityF {
    use autobid_eq::continuous::DensityF;
    match rng.gen_range(0..4) {
        0 => {
            let a = rng.gen_range(0.0..2.0);
            DensityF::uniform(a, a + rng.gen_range(0.2..3.0)).unwrap()
        }
        1 => DensityF::power(rng.gen_range(0.0..4.0)).unwrap(),
        2 => DensityF::exponential(rng.gen_range(0.2..5.0)).unwrap(),
        _ => DensityF::gamma(rng.gen_range(1.0..5.0), rng.gen_range(0.5..3.0)).unwrap(),
    }
}
