//! Trust-region optimization for stochastic minimax problems whose sampling
//! distribution depends on the outer decision.
//!
//! The solver learns the distribution map locally with linear regression,
//! maximizes the inner problem inexactly, and accepts steps through a
//! sampled actual-to-predicted reduction ratio. Two benchmark problems and
//! two comparison baselines are included.

pub mod baselines;
pub mod domain;
pub mod error;
pub mod exec;
pub mod inner;
pub mod llr;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod schedule;
pub mod tr;

pub use domain::{uniform_ball_sample, InnerDomain};
pub use error::{Error, Result};
pub use exec::Exec;
pub use problem::{Dims, DistributionOracle, PrimalDiagnostics, PrimalEstimate, Problem};
pub use rng::RngKey;
