//! Small canned instances used in tests, the CLI and documentation.

use crate::model::{ConstraintProfile, DiscreteInstance};

/// Four queries; advertiser 1 values (2.1, 40, 30, 20), advertiser 2 values
/// (1, 20, 25, 100), both budget-constrained.
pub fn table1(b1: f64, b2: f64) -> DiscreteInstance {
    DiscreteInstance::with_default_ids(
        vec![vec![2.1, 40.0, 30.0, 20.0], vec![1.0, 20.0, 25.0, 100.0]],
        vec![ConstraintProfile::budget(b1), ConstraintProfile::budget(b2)],
    )
    .expect("fixed instance is valid")
}

/// Three queries; advertiser 1 values (40, 30, 20), advertiser 2 values
/// (10, 13, 100), both target-constrained.
pub fn table2(t1: f64, t2: f64) -> DiscreteInstance {
    DiscreteInstance::with_default_ids(
        vec![vec![40.0, 30.0, 20.0], vec![10.0, 13.0, 100.0]],
        vec![ConstraintProfile::target(t1), ConstraintProfile::target(t2)],
    )
    .expect("fixed instance is valid")
}
