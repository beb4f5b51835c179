//! Quadrature and root-finding primitives used by every solver.

pub mod quad;
pub mod roots;

pub use quad::{integrate, integrate_with_breaks, log_space, lin_space, CumulativeTable, QuadResult, QuadTol};
pub use roots::{bisect, brent, golden_min, grid_min, scan_sign_changes, Bracket, Root};
