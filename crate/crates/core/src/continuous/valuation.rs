//! Value functions on the unit query interval and the change of variables
//! to the bid-ratio axis.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::density::{DensityF, Provenance, RealFn, INFINITE_SUPPORT};
use crate::error::{Error, Result};
use crate::numerics::{integrate, QuadTol};

/// Reparameterization used by [`ValuationPair::tan_construction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TanVariant {
    /// `h(q) = tan(pi q / 2)`, covering `[0, inf)`.
    #[default]
    Stretched,
    /// `h(q) = tan(q)`, covering `[0, tan 1]` only.
    Literal,
}

/// Value densities `v1, v2` of the two advertisers over queries `q in [0, 1]`.
#[derive(Clone)]
pub struct ValuationPair {
    pub v1: RealFn,
    pub v2: RealFn,
    /// Closed form of `v1 / v2` when known; used where `v2` vanishes.
    pub h: Option<RealFn>,
    pub label: String,
}

impl fmt::Debug for ValuationPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValuationPair")
            .field("label", &self.label)
            .field("explicit_h", &self.h.is_some())
            .finish()
    }
}

impl ValuationPair {
    pub fn new(v1: RealFn, v2: RealFn, label: impl Into<String>) -> Self {
        Self {
            v1,
            v2,
            h: None,
            label: label.into(),
        }
    }

    /// Pair whose ratio `h` is known in closed form.
    pub fn with_ratio(v1: RealFn, v2: RealFn, h: RealFn, label: impl Into<String>) -> Self {
        Self {
            v1,
            v2,
            h: Some(h),
            label: label.into(),
        }
    }

    /// Valuations whose bid-ratio density is `f0`: `h` is the chosen tan map,
    /// `v2(q) = f0(h(q)) h'(q)` and `v1 = h v2`.
    pub fn tan_construction(f0: &DensityF, variant: TanVariant) -> Self {
        let (scale, label) = match variant {
            TanVariant::Stretched => (FRAC_PI_2, "tan-stretched"),
            TanVariant::Literal => (1.0, "tan-literal"),
        };
        let h: RealFn = Arc::new(move |q: f64| (scale * q).tan());
        let f = f0.clone();
        let v2: RealFn = Arc::new(move |q: f64| {
            if q >= 1.0 && variant == TanVariant::Stretched {
                return 0.0;
            }
            let t = (scale * q).tan();
            f.eval(t) * scale * (1.0 + t * t)
        });
        let v2c = v2.clone();
        let hc = h.clone();
        let v1: RealFn = Arc::new(move |q: f64| {
            let v = v2c(q);
            if v == 0.0 {
                0.0
            } else {
                hc(q) * v
            }
        });
        Self::with_ratio(v1, v2, h, format!("{label}({})", f0.label()))
    }

    /// `h(q) = v1(q) / v2(q)`, or the closed form when supplied. A `0/0`
    /// at either end of `[0, 1]` is replaced by the one-sided limit.
    pub fn ratio(&self, q: f64) -> f64 {
        let raw = |q: f64| match &self.h {
            Some(h) => h(q),
            None => (self.v1)(q) / (self.v2)(q),
        };
        let h = raw(q);
        if h.is_nan() && q <= 0.0 {
            raw(1e-15)
        } else if h.is_nan() && q >= 1.0 {
            raw(1.0 - 1e-15)
        } else {
            h
        }
    }

    /// Checks `h` strictly increasing and `v2` positive on a uniform grid of
    /// `n + 1` points (endpoints excluded where `h` is unbounded).
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=n {
            let q = i as f64 / n as f64;
            let h = self.ratio(q);
            if h.is_nan() {
                return Err(Error::NonFinite { at: q });
            }
            if h.is_infinite() && i == n {
                break;
            }
            if !(h > prev) {
                return Err(Error::NotInvertible { q });
            }
            prev = h;
        }
        Ok(())
    }
}

/// Inverts the strictly increasing `h` on `[0, 1]` by bisection.
fn invert(h: &dyn Fn(f64) -> f64, z: f64) -> f64 {
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if h(m) < z {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Central-difference derivative with a step that shrinks near the ends of
/// `[0, 1]`, one-sided at the ends themselves. Close to an end a fixed-step
/// inward stencil replaces the central one whenever the two agree, since the
/// shrunken central step amplifies rounding.
fn derivative(h: &dyn Fn(f64) -> f64, q: f64) -> f64 {
    let room = q.min(1.0 - q);
    if room <= 0.0 {
        let d = 1e-7;
        return if q <= 0.0 {
            (h(d) - h(0.0)) / d
        } else {
            (h(1.0) - h(1.0 - d)) / d
        };
    }
    let d = 1e-3 * room.min(1.0);
    // Richardson extrapolation of two central differences.
    let d1 = (h(q + d) - h(q - d)) / (2.0 * d);
    let d2 = (h(q + 0.5 * d) - h(q - 0.5 * d)) / d;
    let central = (4.0 * d2 - d1) / 3.0;
    if room >= ONE_SIDED_STEP {
        return central;
    }
    let s = if q < 0.5 { ONE_SIDED_STEP } else { -ONE_SIDED_STEP };
    let h0 = h(q);
    let one_sided = (-3.0 * h0 + 4.0 * h(q + s) - h(q + 2.0 * s)) / (2.0 * s);
    // Central rounding noise is about eps |h| / d.
    let noise = 100.0 * f64::EPSILON * h0.abs() / d;
    if (one_sided - central).abs() <= 1e-4 * central.abs() + noise {
        one_sided
    } else {
        central
    }
}

const ONE_SIDED_STEP: f64 = 1e-5;

/// The bid-ratio density `f(z) = v2(h^{-1}(z)) / h'(h^{-1}(z))` on
/// `[h(0), h(1)]`, with the inverse and derivative evaluated numerically.
pub fn density_from_valuations(vp: &ValuationPair) -> Result<DensityF> {
    vp.validate(2000)?;
    let lo = vp.ratio(0.0).max(0.0);
    let hi = vp.ratio(1.0);
    let hi = if hi.is_finite() { hi } else { INFINITE_SUPPORT * 2.0 };
    let pair = vp.clone();
    let f: RealFn = Arc::new(move |z: f64| {
        let h = |q: f64| pair.ratio(q);
        let q = invert(&h, z);
        let dh = derivative(&h, q);
        if !(dh > 0.0) || !dh.is_finite() {
            return 0.0;
        }
        ((pair.v2)(q) / dh).max(0.0)
    });
    DensityF::from_fn(f, lo, hi, format!("from-valuations({})", vp.label), Provenance::FromValuations)
}

/// `(∫ f, ∫_0^1 v2)`; the two agree when the change of variables is exact.
pub fn valuation_mass_check(vp: &ValuationPair, f: &DensityF) -> (f64, f64) {
    let v2 = vp.v2.clone();
    let mass_v2 = integrate(move |q| v2(q), 0.0, 1.0, QuadTol::default()).value;
    (f.mass(), mass_v2)
}
