//! Risk-averse routing on time-dependent stochastic road networks.
//!
//! The core primitive is a multi-label A* search over per-node Pareto sets
//! of travel-time distributions, ordered by first-order stochastic
//! dominance. Any risk measure that is monotone with respect to that order
//! (expectation, value-at-risk, conditional value-at-risk, expected
//! disutility) can be minimized exactly.

pub mod dist;
pub mod error;
pub mod heuristic;
pub mod ingest;
pub mod network;
pub mod oracle;
pub mod risk;
pub mod search;
pub mod synth;
pub mod util;

pub use dist::DiscreteDistribution;
pub use error::{Error, Result};
pub use risk::RiskSpec;
