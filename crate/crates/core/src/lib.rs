//! Monte Carlo pricing of non-agency CMO tranches.
//!
//! Each iteration simulates a CIR short-rate path, derives Richard-Roll
//! prepayment speeds from the implied long rate, draws monthly pool default
//! fractions from a one-factor Gaussian credit model (or loan-level default
//! times from a Gaussian copula) and runs the pool cash flows through a
//! sequential-pay waterfall with junior-first loss allocation.

pub mod credit;
pub mod dealspec;
pub mod error;
pub mod model;
pub mod normal;
pub mod prepay;
pub mod pricer;
pub mod rates;
pub mod rng;
pub mod stats;
pub mod waterfall;

pub use dealspec::{parse_deal_spec, parse_with_overrides, DealFile};
pub use error::{CmoError, Result};
pub use model::{CreditModel, DealSpec, ModelParams, SimulationConfig};
pub use pricer::{compare_models, run_simulation, ComparisonReport, SimulationSummary};
