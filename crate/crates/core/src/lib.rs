//! Auto-bidding equilibria for per-query auctions with budget and target
//! cost-per-acquisition constrained advertisers.

pub mod aic;
pub mod continuous;
pub mod error;
pub mod fixtures;
pub mod fppe;
pub mod model;
pub mod numerics;
pub mod spa_discrete;
pub mod truthful;

pub use error::{Error, Result};
