//! Densities on the bid-ratio axis and their truncated moments.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_with_breaks, QuadResult, QuadTol};

/// Shared real function handle.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Supports extending past this point are treated as unbounded.
pub const INFINITE_SUPPORT: f64 = 1e12;

/// Tail mass fraction cut off when locating the effective support.
pub const TAIL_FRACTION: f64 = 1e-12;

/// Where a density came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Direct,
    FromValuations,
    FromG,
}

/// Integration weight for [`DensityF::moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    One,
    Z,
}

/// Which side of the threshold to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `z <= r`
    Below,
    /// `z >= r`
    Above,
}

struct Inner {
    f: RealFn,
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
    label: String,
    provenance: Provenance,
    tol: QuadTol,
    mass: OnceLock<f64>,
    support: OnceLock<(f64, f64)>,
}

/// A nonnegative density `f(z)` on `[lo, hi]` (zero elsewhere); `hi` may be
/// infinite. Cheap to clone and safe to share between threads.
#[derive(Clone)]
pub struct DensityF {
    inner: Arc<Inner>,
}

impl fmt::Debug for DensityF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityF")
            .field("label", &self.inner.label)
            .field("lo", &self.inner.lo)
            .field("hi", &self.inner.hi)
            .field("provenance", &self.inner.provenance)
            .finish()
    }
}

impl DensityF {
    /// Wraps an arbitrary function. `hi` above [`INFINITE_SUPPORT`] is
    /// treated as infinite.
    pub fn from_fn(
        f: RealFn,
        lo: f64,
        hi: f64,
        label: impl Into<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        if !(lo >= 0.0) || !(hi > lo) {
            return Err(Error::InvalidInstance(format!(
                "density support [{lo}, {hi}] must satisfy 0 <= lo < hi"
            )));
        }
        let hi = if hi > INFINITE_SUPPORT { f64::INFINITY } else { hi };
        Ok(Self {
            inner: Arc::new(Inner {
                f,
                lo,
                hi,
                breaks: Vec::new(),
                label: label.into(),
                provenance,
                // Numerically inverted densities carry ~1e-12 noise.
                tol: if provenance == Provenance::FromValuations {
                    QuadTol {
                        abs: 1e-14,
                        rel: 1e-10,
                        max_panels: 2000,
                    }
                } else {
                    QuadTol {
                        abs: 1e-300,
                        rel: 1e-12,
                        max_panels: 2000,
                    }
                },
                mass: OnceLock::new(),
                support: OnceLock::new(),
            }),
        })
    }

    fn with_breaks(self, breaks: Vec<f64>) -> Self {
        let inner = Arc::try_unwrap(self.inner).unwrap_or_else(|_| unreachable!("fresh density"));
        Self {
            inner: Arc::new(Inner { breaks, ..inner }),
        }
    }

    /// `f = 1` on `[a, b]`.
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::from_fn(Arc::new(|_| 1.0), a, b, format!("uniform[{a},{b}]"), Provenance::Direct)
    }

    /// `f = z^k` on `[0, 1]`, `k > -1`.
    pub fn power(k: f64) -> Result<Self> {
        if !(k > -1.0) {
            return Err(Error::InvalidInstance(format!("power k={k} must exceed -1")));
        }
        Self::from_fn(Arc::new(move |z: f64| z.powf(k)), 0.0, 1.0, format!("power({k})"), Provenance::Direct)
    }

    /// `f = e^{-rate z}` on `[0, inf)`.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInstance(format!("rate {rate} must be positive")));
        }
        Self::from_fn(
            Arc::new(move |z: f64| (-rate * z).exp()),
            0.0,
            f64::INFINITY,
            format!("exp({rate})"),
            Provenance::Direct,
        )
    }

    /// Unnormalized gamma density `z^{shape-1} e^{-rate z}` on `[0, inf)`.
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "gamma shape {shape} and rate {rate} must be positive"
            )));
        }
        Self::from_fn(
            Arc::new(move |z: f64| {
                if z <= 0.0 {
                    if shape == 1.0 {
                        1.0
                    } else if shape > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    ((shape - 1.0) * z.ln() - rate * z).exp()
                }
            }),
            0.0,
            f64::INFINITY,
            format!("gamma({shape},{rate})"),
            Provenance::Direct,
        )
    }

    /// Linear interpolation through `(z, f)` points with strictly increasing
    /// `z`; zero outside the first and last point.
    pub fn piecewise_linear(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInstance("piecewise-linear density needs 2+ points".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidInstance("piecewise-linear abscissae must increase".into()));
        }
        if points.iter().any(|p| !(p.1 >= 0.0) || !p.1.is_finite() || !p.0.is_finite()) {
            return Err(Error::InvalidInstance("piecewise-linear values must be finite and >= 0".into()));
        }
        let pts: Vec<(f64, f64)> = points.to_vec();
        let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
        let knots: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let table = pts.clone();
        let f = Arc::new(move |z: f64| {
            let i = match table.binary_search_by(|p| p.0.total_cmp(&z)) {
                Ok(i) => return table[i].1,
                Err(0) => return 0.0,
                Err(i) if i == table.len() => return 0.0,
                Err(i) => i - 1,
            };
            let (x0, y0) = table[i];
            let (x1, y1) = table[i + 1];
            y0 + (y1 - y0) * (z - x0) / (x1 - x0)
        });
        Ok(Self::from_fn(f, lo, hi, "piecewise-linear", Provenance::Direct)?.with_breaks(knots))
    }

    pub fn lo(&self) -> f64 {
        self.inner.lo
    }

    pub fn hi(&self) -> f64 {
        self.inner.hi
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn provenance(&self) -> Provenance {
        self.inner.provenance
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.inner.breaks
    }

    /// Density value; zero outside the support.
    pub fn eval(&self, z: f64) -> f64 {
        if z < self.inner.lo || z > self.inner.hi {
            0.0
        } else {
            (self.inner.f)(z)
        }
    }

    fn integrate_range(&self, w: Weight, a: f64, b: f64) -> f64 {
        self.integrate_checked(w, a, b).value
    }

    fn integrate_checked(&self, w: Weight, a: f64, b: f64) -> QuadResult {
        let a = a.max(self.inner.lo);
        let b = b.min(self.inner.hi);
        if !(b > a) {
            return QuadResult {
                value: 0.0,
                error: 0.0,
                converged: true,
            };
        }
        let f = &self.inner.f;
        match w {
            Weight::One => integrate_with_breaks(|z| f(z), a, b, &self.inner.breaks, self.inner.tol),
            Weight::Z => integrate_with_breaks(|z| z * f(z), a, b, &self.inner.breaks, self.inner.tol),
        }
    }

    /// `∫ P(z) f(z) dz` over one side of `r`.
    pub fn moment(&self, w: Weight, side: Side, r: f64) -> f64 {
        match side {
            Side::Below => self.integrate_range(w, self.inner.lo, r),
            Side::Above => self.integrate_range(w, r, self.inner.hi),
        }
    }

    /// Checked version of [`moment`](Self::moment): rejects negative `r` and
    /// densities without a finite first moment.
    pub fn try_moment(&self, w: Weight, side: Side, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInstance(format!("threshold r={r} must be >= 0")));
        }
        self.validate()?;
        Ok(self.moment(w, side, r))
    }

    /// `∫ phi(z) f(z) dz` over the support, split at the density's own
    /// breakpoints and at `extra_breaks`.
    pub fn expectation(&self, phi: impl Fn(f64) -> f64, extra_breaks: &[f64]) -> f64 {
        let mut breaks = self.inner.breaks.clone();
        breaks.extend_from_slice(extra_breaks);
        let f = &self.inner.f;
        integrate_with_breaks(|z| phi(z) * f(z), self.inner.lo, self.inner.hi, &breaks, self.inner.tol).value
    }

    /// The four moments at `r`.
    pub fn moments(&self, r: f64) -> Moments {
        Moments {
            r,
            mass_above: self.moment(Weight::One, Side::Above, r),
            mass_below: self.moment(Weight::One, Side::Below, r),
            z_above: self.moment(Weight::Z, Side::Above, r),
            z_below: self.moment(Weight::Z, Side::Below, r),
        }
    }

    /// `∫ f` over the whole support.
    pub fn mass(&self) -> f64 {
        *self
            .inner
            .mass
            .get_or_init(|| self.integrate_range(Weight::One, self.inner.lo, self.inner.hi))
    }

    /// Checks that `f` is nonnegative at a few probe points and that both
    /// `∫ f` and `∫ z f` are finite and positive.
    pub fn validate(&self) -> Result<()> {
        let total = self.integrate_checked(Weight::One, self.inner.lo, self.inner.hi);
        let first = self.integrate_checked(Weight::Z, self.inner.lo, self.inner.hi);
        // Loose acceptance: a non-converged result still passes when its
        // error estimate is small, which covers integrable endpoint spikes.
        let settled = |q: &QuadResult| q.converged || q.error <= 1e-6 * q.value.abs();
        let (mass, mean) = (total.value, first.value);
        if !mass.is_finite() || !mean.is_finite() || !settled(&total) || !settled(&first) {
            return Err(Error::Divergent(format!(
                "density {} has mass {mass} and first moment {mean}",
                self.inner.label
            )));
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "density {} has no mass",
                self.inner.label
            )));
        }
        let (a, b) = self.effective_support();
        for i in 0..=64 {
            let z = a + (b - a) * i as f64 / 64.0;
            let v = self.eval(z);
            if v < 0.0 || v.is_nan() {
                return Err(Error::InvalidInstance(format!(
                    "density {} is {v} at z={z}",
                    self.inner.label
                )));
            }
        }
        Ok(())
    }

    /// Support trimmed to where all but [`TAIL_FRACTION`] of the mass lies
    /// on each side.
    pub fn effective_support(&self) -> (f64, f64) {
        *self.inner.support.get_or_init(|| {
            let cut = TAIL_FRACTION * self.mass();
            let below = |z: f64| self.integrate_range(Weight::One, self.inner.lo, z);
            let above = |z: f64| self.integrate_range(Weight::One, z, self.inner.hi);
            let top = if self.inner.hi.is_finite() {
                self.inner.hi
            } else {
                let mut x = self.inner.lo.max(1.0);
                while x < 1e300 && above(x) > cut {
                    x *= 2.0;
                }
                x
            };
            let lo = bisect_increasing(|z| below(z) - cut, self.inner.lo, top);
            let hi = if self.inner.hi.is_finite() {
                bisect_increasing(|z| cut - above(z), lo, top)
            } else {
                log_bisect(|z| cut - above(z), 0.5 * top, top)
            };
            (lo, hi)
        })
    }
}

/// Bisection for an increasing `g` with `g(a) <= 0 <= g(b)`.
fn bisect_increasing<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Bisection in log space for an increasing `g` with `g(a) <= 0 <= g(b)`.
fn log_bisect<G: Fn(f64) -> f64>(g: G, a: f64, b: f64) -> f64 {
    let (mut la, mut lb) = (a.ln(), b.ln());
    for _ in 0..60 {
        let m = 0.5 * (la + lb);
        if g(m.exp()) > 0.0 {
            lb = m;
        } else {
            la = m;
        }
    }
    (0.5 * (la + lb)).exp()
}

/// Truncated moments of a density at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub r: f64,
    /// `∫_r^∞ f`
    pub mass_above: f64,
    /// `∫_0^r f`
    pub mass_below: f64,
    /// `∫_r^∞ z f`
    pub z_above: f64,
    /// `∫_0^r z f`
    pub z_below: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_moments() {
        let f = DensityF::uniform(0.0, 1.0).unwrap();
        let m = f.moment(Weight::Z, Side::Below, 2.0 / 3.0);
        assert!((m - 2.0 / 9.0).abs() < 1e-14);
        assert_eq!(f.moment(Weight::One, Side::Above, 1.0), 0.0);
        assert!((f.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_moments() {
        let f = DensityF::exponential(2.0).unwrap();
        let r: f64 = 0.7;
        let above = f.moment(Weight::One, Side::Above, r);
        assert!((above - (-2.0 * r).exp() / 2.0).abs() < 1e-14);
        let z_above = f.moment(Weight::Z, Side::Above, r);
        let exact = (-2.0 * r).exp() * (r / 2.0 + 0.25);
        assert!((z_above - exact).abs() < 1e-14);
    }

    #[test]
    fn effective_support_of_uniform_and_exponential() {
        let (lo, hi) = DensityF::uniform(0.0, 1.0).unwrap().effective_support();
        assert!((lo / 1e-12 - 1.0).abs() < 1e-6, "{lo}");
        assert!((1.0 - hi - 1e-12).abs() < 1e-15, "{hi}");
        let (_, hi) = DensityF::exponential(1.0).unwrap().effective_support();
        assert!((hi - 12.0 * 10f64.ln()).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn piecewise_linear_integrates_exactly() {
        let f = DensityF::piecewise_linear(&[(0.0, 0.0), (1.0, 2.0), (3.0, 2.0)]).unwrap();
        assert!((f.mass() - 5.0).abs() < 1e-13);
        assert!((f.eval(0.5) - 1.0).abs() < 1e-15);
        assert_eq!(f.eval(4.0), 0.0);
    }

    #[test]
    fn negative_threshold_rejected() {
        let f = DensityF::uniform(0.0, 1.0).unwrap();
        assert!(f.try_moment(Weight::One, Side::Above, -1.0).is_err());
    }

    #[test]
    fn divergent_density_rejected() {
        let f = DensityF::from_fn(Arc::new(|z: f64| 1.0 / (1.0 + z)), 0.0, f64::INFINITY, "harmonic", Provenance::Direct).unwrap();
        assert!(matches!(f.validate(), Err(Error::Divergent(_)) | Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn gamma_matches_closed_form_mass() {
        // Γ(3) / 2^3 = 0.25
        let f = DensityF::gamma(3.0, 2.0).unwrap();
        assert!((f.mass() - 0.25).abs() < 1e-13);
    }
}
