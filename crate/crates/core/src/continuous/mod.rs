//! Continuous-query model: densities on the bid-ratio axis, valuations,
//! and the implicit-equation equilibrium solver.

pub mod density;
pub mod solve;
pub mod valuation;

pub use density::{DensityF, Moments, Provenance, RealFn, Side, Weight};
pub use solve::{
    curve_table, existence_check, ratio_curve, recover, solve_equilibrium, verify_fpa_spa_equivalence,
    CurveKind, CurveRow, EquilibriumSet, EquilibriumSolution, EquivalenceReport, ExistenceReport, ScanSpec,
};
pub use valuation::{density_from_valuations, valuation_mass_check, TanVariant, ValuationPair};
