//! Scenario files: one instance payload plus solver options and output
//! paths, stored as JSON.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use autobid_eq::aic::{counterexample_density, cubic_constant};
use autobid_eq::continuous::{density_from_valuations, DensityF, Provenance, RealFn, TanVariant, ValuationPair};
use autobid_eq::model::{ConstraintProfile, DiscreteInstance};
use autobid_eq::spa_discrete::MultiplierBounds;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub payload: Payload,
    #[serde(default)]
    pub options: SolverOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    /// Finite query set.
    Discrete { instance: DiscreteInstance },
    /// Value functions of the two advertisers over queries in `[0, 1]`.
    Continuous {
        v1: FunctionSpec,
        v2: FunctionSpec,
        constraints: [ConstraintProfile; 2],
    },
    /// Bid-ratio density given directly.
    Density {
        density: DensitySpec,
        constraints: [ConstraintProfile; 2],
    },
}

/// Which advertiser's valuation a tan-construction spec yields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    V1,
    V2,
}

/// A real function on `[0, 1]` (valuations) or on the bid-ratio axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FunctionSpec {
    Constant { value: f64 },
    /// `a x^k`, `k > -1`.
    Power { a: f64, k: f64 },
    /// Linear interpolation through `(x, y)` points, constant beyond.
    PiecewiseLinear { points: Vec<(f64, f64)> },
    /// The cubic-family non-monotone density.
    Counterexample,
    /// One side of the tan-construction valuations of the cubic-family
    /// density.
    TanConstruction {
        #[serde(default)]
        variant: TanVariant,
        component: Component,
    },
}

impl FunctionSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            Self::Constant { value } if !value.is_finite() => Err(CliError::validation(format!(
                "constant function value {value} must be finite"
            ))),
            Self::Power { a, k } if !(a.is_finite() && *k > -1.0 && k.is_finite()) => Err(CliError::validation(
                format!("power function needs finite a and k > -1, got a={a} k={k}"),
            )),
            Self::PiecewiseLinear { points } if points.len() < 2 || points.windows(2).any(|w| !(w[1].0 > w[0].0)) => {
                Err(CliError::validation(
                    "piecewise-linear function needs 2+ points with increasing x",
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<RealFn, CliError> {
        self.validate()?;
        Ok(match self.clone() {
            Self::Constant { value } => Arc::new(move |_| value),
            Self::Power { a, k } => Arc::new(move |x: f64| a * x.powf(k)),
            Self::PiecewiseLinear { points } => Arc::new(move |x: f64| interpolate(&points, x)),
            Self::Counterexample => {
                let f = counterexample_density(cubic_constant().0);
                Arc::new(move |x: f64| f.eval(x))
            }
            Self::TanConstruction { variant, component } => {
                let vp = tan_pair(variant);
                match component {
                    Component::V1 => vp.v1,
                    Component::V2 => vp.v2,
                }
            }
        })
    }
}

fn tan_pair(variant: TanVariant) -> ValuationPair {
    ValuationPair::tan_construction(&counterexample_density(cubic_constant().0), variant)
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    match points.binary_search_by(|p| p.0.total_cmp(&x)) {
        Ok(i) => points[i].1,
        Err(0) => points[0].1,
        Err(i) if i == points.len() => points[points.len() - 1].1,
        Err(i) => {
            let (x0, y0) = points[i - 1];
            let (x1, y1) = points[i];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}

/// Named bid-ratio densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DensitySpec {
    Uniform { a: f64, b: f64 },
    /// `z^k` on `[0, 1]`.
    Power { k: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    PiecewiseLinear { points: Vec<(f64, f64)> },
    Counterexample,
    /// Any function spec restricted to `[lo, hi]`.
    Function { f: FunctionSpec, lo: f64, hi: f64 },
}

impl DensitySpec {
    pub fn build(&self) -> Result<DensityF, CliError> {
        let f = match self {
            Self::Uniform { a, b } => DensityF::uniform(*a, *b)?,
            Self::Power { k } => DensityF::power(*k)?,
            Self::Exponential { rate } => DensityF::exponential(*rate)?,
            Self::Gamma { shape, rate } => DensityF::gamma(*shape, *rate)?,
            Self::PiecewiseLinear { points } => DensityF::piecewise_linear(points)?,
            Self::Counterexample => counterexample_density(cubic_constant().0),
            Self::Function { f, lo, hi } => DensityF::from_fn(f.build()?, *lo, *hi, "function", Provenance::Direct)?,
        };
        f.validate()?;
        Ok(f)
    }
}

/// Short forms accepted by `--density`: `uniform01`, `uniform:A:B`,
/// `power:K`, `exp:RATE`, `gamma:SHAPE:RATE`, `counterexample`.
impl FromStr for DensitySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("density '{s}' is missing parameter {i}"))?
                .parse::<f64>()
                .map_err(|e| format!("density '{s}': {e}"))
        };
        let arity = |n: usize| {
            if parts.len() == n + 1 {
                Ok(())
            } else {
                Err(format!("density '{}' takes {n} parameter(s)", parts[0]))
            }
        };
        match parts[0] {
            "uniform01" => arity(0).map(|_| Self::Uniform { a: 0.0, b: 1.0 }),
            "uniform" => arity(2).and_then(|_| Ok(Self::Uniform { a: num(1)?, b: num(2)? })),
            "power" => arity(1).and_then(|_| Ok(Self::Power { k: num(1)? })),
            "exp" => arity(1).and_then(|_| Ok(Self::Exponential { rate: num(1)? })),
            "gamma" => arity(2).and_then(|_| Ok(Self::Gamma { shape: num(1)?, rate: num(2)? })),
            "counterexample" => arity(0).map(|_| Self::Counterexample),
            other => Err(format!(
                "unknown density '{other}' (expected uniform01, uniform:A:B, power:K, exp:RATE, gamma:SHAPE:RATE or counterexample)"
            )),
        }
    }
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { a, b } => write!(f, "uniform:{a}:{b}"),
            Self::Power { k } => write!(f, "power:{k}"),
            Self::Exponential { rate } => write!(f, "exp:{rate}"),
            Self::Gamma { shape, rate } => write!(f, "gamma:{shape}:{rate}"),
            Self::Counterexample => write!(f, "counterexample"),
            Self::PiecewiseLinear { .. } => write!(f, "piecewise-linear"),
            Self::Function { .. } => write!(f, "function"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsChoice {
    /// Multipliers no larger than each constraint allows on its own.
    #[default]
    Natural,
    Unrestricted,
}

impl BoundsChoice {
    pub fn bounds(self, inst: &DiscreteInstance) -> MultiplierBounds {
        match self {
            Self::Natural => MultiplierBounds::natural(inst),
            Self::Unrestricted => MultiplierBounds::unrestricted(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Log-spaced scan points for continuous root finding.
    pub points: usize,
    pub r_lo: Option<f64>,
    pub r_hi: Option<f64>,
    /// Upper multiplier for the pacing solver; 10 max(T, 1) when absent.
    pub cap: Option<f64>,
    pub bounds: BoundsChoice,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            points: 2048,
            r_lo: None,
            r_hi: None,
            cap: None,
            bounds: BoundsChoice::Natural,
        }
    }
}

pub const MIN_POINTS: usize = 16;
pub const MAX_POINTS: usize = 1 << 20;

impl SolverOptions {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(MIN_POINTS..=MAX_POINTS).contains(&self.points) {
            return Err(CliError::validation(format!(
                "points {} outside [{MIN_POINTS}, {MAX_POINTS}]",
                self.points
            )));
        }
        for (name, v) in [("r_lo", self.r_lo), ("r_hi", self.r_hi), ("cap", self.cap)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::validation(format!("{name} = {v} must be finite and positive")));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.r_lo, self.r_hi) {
            if lo >= hi {
                return Err(CliError::validation(format!("r_lo {lo} must be below r_hi {hi}")));
            }
        }
        Ok(())
    }

    pub fn scan(&self) -> autobid_eq::continuous::ScanSpec {
        autobid_eq::continuous::ScanSpec {
            points: self.points,
            lo: self.r_lo,
            hi: self.r_hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read scenario {}: {e}", path.display())))?;
        let s: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("malformed scenario {}: {e}", path.display())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.options.validate()?;
        match &self.payload {
            Payload::Discrete { instance } => instance.validate()?,
            Payload::Continuous { v1, v2, constraints } => {
                v1.validate()?;
                v2.validate()?;
                for c in constraints {
                    c.validate()?;
                }
            }
            Payload::Density { constraints, .. } => {
                for c in constraints {
                    c.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn discrete(&self) -> Result<&DiscreteInstance, CliError> {
        match &self.payload {
            Payload::Discrete { instance } => Ok(instance),
            _ => Err(CliError::validation("this subcommand needs a discrete scenario")),
        }
    }

    /// Density and constraint pair of a continuous or density scenario.
    pub fn continuous(&self) -> Result<(DensityF, [ConstraintProfile; 2]), CliError> {
        match &self.payload {
            Payload::Density { density, constraints } => Ok((density.build()?, *constraints)),
            Payload::Continuous { v1, v2, constraints } => {
                let vp = match (v1, v2) {
                    // Keep the closed-form ratio of the tan construction.
                    (
                        FunctionSpec::TanConstruction { variant: a, component: Component::V1 },
                        FunctionSpec::TanConstruction { variant: b, component: Component::V2 },
                    ) if a == b => tan_pair(*a),
                    _ => ValuationPair::new(v1.build()?, v2.build()?, "scenario"),
                };
                Ok((density_from_valuations(&vp)?, *constraints))
            }
            Payload::Discrete { .. } => Err(CliError::validation("this subcommand needs a continuous or density scenario")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Scenario {
        Scenario {
            payload: Payload::Continuous {
                v1: FunctionSpec::PiecewiseLinear {
                    points: vec![(0.0, 0.1), (0.5, 0.7), (1.0, 1.0 / 3.0)],
                },
                v2: FunctionSpec::Power { a: 0.3, k: 0.5 },
                constraints: [ConstraintProfile::budget(0.1), ConstraintProfile::target(2.0 / 7.0)],
            },
            options: SolverOptions {
                cap: Some(1.0 / 3.0),
                ..SolverOptions::default()
            },
            output: OutputSpec {
                csv: Some("out.csv".into()),
                json: None,
            },
        }
    }

    #[test]
    fn json_round_trip() {
        let s = sample();
        let back: Scenario = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn density_shorthand() {
        assert_eq!("uniform01".parse::<DensitySpec>().unwrap(), DensitySpec::Uniform { a: 0.0, b: 1.0 });
        assert_eq!("gamma:2:3".parse::<DensitySpec>().unwrap(), DensitySpec::Gamma { shape: 2.0, rate: 3.0 });
        assert!("exp".parse::<DensitySpec>().is_err());
        assert!("cauchy".parse::<DensitySpec>().is_err());
        for s in ["uniform:0.5:2", "power:3", "exp:1.5", "counterexample"] {
            assert_eq!(s.parse::<DensitySpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn options_are_range_checked() {
        let mut o = SolverOptions::default();
        assert!(o.validate().is_ok());
        o.points = 3;
        assert!(o.validate().is_err());
        o = SolverOptions {
            r_lo: Some(2.0),
            r_hi: Some(1.0),
            ..SolverOptions::default()
        };
        assert!(o.validate().is_err());
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let err = serde_json::from_str::<Scenario>(r#"{"kind": "graph"}"#).unwrap_err();
        assert!(err.to_string().contains("graph"), "{err}");
    }

    #[test]
    fn power_function_needs_integrable_exponent() {
        assert!(FunctionSpec::Power { a: 1.0, k: -1.0 }.build().is_err());
        let f = FunctionSpec::Power { a: 2.0, k: 2.0 }.build().unwrap();
        assert_eq!(f(0.5), 0.5);
    }
}
