//! Bracketed root finding, grid scans for sign changes, and 1-D minimization.

use rayon::prelude::*;

/// A bracket `[lo, hi]` whose function values differ in sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Outcome of a bracketed root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

fn opposite(a: f64, b: f64) -> bool {
    (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)
}

/// Plain bisection until the bracket width is below `xtol`.
///
/// Returns `None` if the endpoints do not straddle a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Option<Root> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(Root {
            x: lo,
            fx: 0.0,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Some(Root {
            x: hi,
            fx: 0.0,
            iterations: 0,
        });
    }
    if !opposite(f_lo, f_hi) {
        return None;
    }
    let mut iterations = 0;
    while hi - lo > xtol && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        iterations += 1;
        if fm == 0.0 {
            return Some(Root {
                x: mid,
                fx: 0.0,
                iterations,
            });
        }
        if opposite(f_lo, fm) {
            hi = mid;
        } else {
            lo = mid;
            f_lo = fm;
        }
    }
    let x = 0.5 * (lo + hi);
    Some(Root {
        x,
        fx: f(x),
        iterations,
    })
}

/// Brent's method (inverse quadratic interpolation with bisection fallback).
pub fn brent<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Option<Root> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(Root {
            x: a,
            fx: 0.0,
            iterations: 0,
        });
    }
    if fb == 0.0 {
        return Some(Root {
            x: b,
            fx: 0.0,
            iterations: 0,
        });
    }
    if !opposite(fa, fb) {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iterations in 1..=200 {
        if opposite(fb, fc) {
            // keep c on the far side of b
        } else {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(Root {
                x: b,
                fx: fb,
                iterations,
            });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(Root {
        x: b,
        fx: fb,
        iterations: 200,
    })
}

/// Evaluates `f` on `grid` (in parallel) and returns every adjacent pair
/// with a sign change. Non-finite samples break brackets: a pair touching a
/// NaN is skipped, and `±∞` is treated by its sign.
///
/// A grid point where `f` is exactly zero is reported as a degenerate
/// bracket `[x, x]`.
pub fn scan_sign_changes<F>(f: F, grid: &[f64]) -> Vec<Bracket>
where
    F: Fn(f64) -> f64 + Sync,
{
    let values: Vec<f64> = grid.par_iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 0..grid.len() {
        let v = values[i];
        if v == 0.0 {
            out.push(Bracket {
                lo: grid[i],
                hi: grid[i],
                f_lo: 0.0,
                f_hi: 0.0,
            });
            continue;
        }
        if i + 1 < grid.len() {
            let w = values[i + 1];
            if v.is_nan() || w.is_nan() {
                continue;
            }
            if opposite(v, w) {
                out.push(Bracket {
                    lo: grid[i],
                    hi: grid[i + 1],
                    f_lo: v,
                    f_hi: w,
                });
            }
        }
    }
    out
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Grid search followed by golden-section refinement around the best cell.
pub fn grid_min<F: Fn(f64) -> f64>(f: F, grid: &[f64], xtol: f64) -> (f64, f64) {
    assert!(grid.len() >= 3);
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    golden_min(f, lo, hi, xtol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::lin_space;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_same_sign() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-9).is_none());
    }

    #[test]
    fn brent_matches_bisect() {
        let f = |x: f64| x.cos() - x;
        let a = brent(f, 0.0, 1.0, 1e-14).unwrap();
        let b = bisect(f, 0.0, 1.0, 1e-14).unwrap();
        assert!((a.x - b.x).abs() < 1e-12);
        assert!(a.iterations < b.iterations);
    }

    #[test]
    fn brent_on_steep_function() {
        let r = brent(|x| (x - 0.3).powi(3), -5.0, 5.0, 1e-14).unwrap();
        assert!((r.x - 0.3).abs() < 1e-4);
    }

    #[test]
    fn scan_finds_all_cubic_roots() {
        let grid = lin_space(-3.0, 3.0, 601);
        let brackets = scan_sign_changes(|x| (x - 1.005) * (x + 2.005) * (x - 0.005), &grid);
        assert_eq!(brackets.len(), 3);
    }

    #[test]
    fn golden_min_of_parabola() {
        let (x, fx) = golden_min(|x| (x - 1.3).powi(2) + 0.5, 0.0, 3.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-8);
        assert!((fx - 0.5).abs() < 1e-15);
    }
}
