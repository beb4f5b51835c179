//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Finite intervals are bisected globally, always splitting the panel with
//! the largest error estimate. Semi-infinite intervals `[a, ∞)` are mapped
//! onto `[0, 1)` with `z = a + t / (1 - t)` before integration; the Kronrod
//! nodes never touch `t = 1`, so integrands only need to decay.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre node.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        Self {
            abs: 1e-15,
            rel: 1e-12,
            max_panels: 4000,
        }
    }
}

impl QuadTol {
    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }
}

/// Integral estimate with its error bound and a convergence flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: QuadTol) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (value, error) = kronrod_panel(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut panels = 1;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return QuadResult {
                value: total,
                error: total_err,
                converged: false,
            };
        }
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            break;
        }
        if panels >= tol.max_panels {
            return QuadResult {
                value: total,
                error: total_err,
                converged: false,
            };
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            heap.push(worst);
            return QuadResult {
                value: total,
                error: total_err,
                converged: false,
            };
        }
        let (lv, le) = kronrod_panel(f, worst.a, mid);
        let (rv, re) = kronrod_panel(f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
        panels += 1;
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    QuadResult {
        value,
        error,
        converged: true,
    }
}

/// Integrates `f` over `[a, b]`; `b` may be `f64::INFINITY`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> QuadResult {
    if b < a {
        let r = integrate(f, b, a, tol);
        return QuadResult {
            value: -r.value,
            ..r
        };
    }
    if b.is_infinite() {
        let mapped = |t: f64| {
            let s = 1.0 - t;
            let z = a + t / s;
            let y = f(z);
            if y == 0.0 {
                0.0
            } else {
                y / (s * s)
            }
        };
        adaptive(&mapped, 0.0, 1.0, tol)
    } else {
        adaptive(&f, a, b, tol)
    }
}

/// Integrates over `[a, b]` split at every breakpoint strictly inside it.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: QuadTol,
) -> QuadResult {
    let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    cuts.push(a);
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = QuadResult {
        value: 0.0,
        error: 0.0,
        converged: true,
    };
    for w in cuts.windows(2) {
        let r = integrate(&f, w[0], w[1], tol);
        out.value += r.value;
        out.error += r.error;
        out.converged &= r.converged;
    }
    out
}

/// Running integral `F(x) = ∫_{x0}^{x} f` tabulated on a knot grid and
/// interpolated with cubic Hermite polynomials, using `f` itself as the
/// exact derivative at every knot.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl CumulativeTable {
    /// Builds the table; `knots` must be strictly increasing.
    pub fn build<F: Fn(f64) -> f64>(f: F, knots: Vec<f64>, tol: QuadTol) -> Self {
        assert!(knots.len() >= 2, "cumulative table needs at least two knots");
        let slopes: Vec<f64> = knots.iter().map(|&x| f(x)).collect();
        let mut values = Vec::with_capacity(knots.len());
        values.push(0.0);
        let mut acc = 0.0;
        for w in knots.windows(2) {
            acc += integrate(&f, w[0], w[1], tol).value;
            values.push(acc);
        }
        Self {
            knots,
            values,
            slopes,
        }
    }

    /// Adds a constant to every tabulated value.
    pub fn shift(&mut self, offset: f64) {
        self.values.iter_mut().for_each(|v| *v += offset);
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        *self.knots.last().expect("non-empty knots")
    }

    pub fn total(&self) -> f64 {
        *self.values.last().expect("non-empty values")
    }

    /// Interpolated running integral; `None` outside the knot range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if !(x >= self.lower() && x <= self.upper()) {
            return None;
        }
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => return Some(self.values[i]),
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(
            h00 * self.values[i]
                + h10 * h * self.slopes[i]
                + h01 * self.values[i + 1]
                + h11 * h * self.slopes[i + 1],
        )
    }
}

/// `n` points spaced evenly in log scale over `[lo, hi]`, both ends included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
    out[0] = lo;
    out[n - 1] = hi;
    out
}

/// `n` evenly spaced points over `[lo, hi]`, both ends included.
pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    out[n - 1] = hi;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, QuadTol::default());
        assert!((r.value - 8.0).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, QuadTol::default());
        assert!((r.value - 1.0).abs() < 1e-12, "{r:?}");
        let r = integrate(|x| x * (-2.0 * x).exp(), 1.0, f64::INFINITY, QuadTol::default());
        let exact = 0.75 * (-2.0f64).exp();
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn heavy_tail_converges() {
        // ∫_1^∞ x^-3 = 1/2
        let r = integrate(|x| x.powi(-3), 1.0, f64::INFINITY, QuadTol::default());
        assert!((r.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn breakpoints_handle_jumps() {
        let step = |x: f64| if x < 1.0 { 0.0 } else { 2.0 };
        let r = integrate_with_breaks(step, 0.0, 3.0, &[1.0], QuadTol::default());
        assert!((r.value - 4.0).abs() < 1e-14);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(|x| x, 1.0, 0.0, QuadTol::default());
        assert!((r.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn cumulative_table_matches_closed_form() {
        let knots = log_space(1e-3, 10.0, 400);
        let table = CumulativeTable::build(|x| 1.0 / (1.0 + x), knots, QuadTol::default());
        for &x in &[1e-3f64, 0.02, 0.5, 1.0, 3.3, 10.0] {
            let exact = (1.0 + x).ln() - (1.0f64 + 1e-3).ln();
            assert!((table.eval(x).unwrap() - exact).abs() < 1e-9, "x={x}");
        }
        assert!(table.eval(20.0).is_none());
    }

    #[test]
    fn grids_include_endpoints() {
        let g = log_space(1e-3, 1e3, 7);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[6], 1e3);
        assert!((g[3] - 1.0).abs() < 1e-12);
        let l = lin_space(0.0, 1.0, 5);
        assert_eq!(l, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
