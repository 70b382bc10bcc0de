//! Daily-resolution backtesting engine for a coordinated trading and
//! options-hedging agent pair.
//!
//! The numeric kernels ([`options_pricing`], [`metrics`], the policy
//! approximator in [`rl::approximator`] and the rolling Sharpe tracker) are
//! generic over [`scalar::Real`]; the aliases below pin them to `f64`, which is
//! what the engine itself runs on. Accounting, agents, the ensemble protocol
//! and the coordinator work in `f64` directly.

pub mod agents;
pub mod baselines;
pub mod checkpoint;
pub mod compare;
pub mod config;
pub mod coordinator;
pub mod ensemble;
pub mod error;
pub mod market_data;
pub mod metrics;
pub mod options_pricing;
pub mod plot;
pub mod portfolio;
pub mod rl;
pub mod scalar;
pub mod signals;

pub use error::{Error, Result};
pub use scalar::Real;

/// Black–Scholes / CRR inputs in double precision.
pub type Pricing = options_pricing::PricingInputs<f64>;
/// Single-precision pricing inputs, mostly useful for bulk synthetic quotes.
pub type PricingF32 = options_pricing::PricingInputs<f32>;
/// Performance metric table in double precision.
pub type Metrics = metrics::MetricTable<f64>;
/// Feed-forward policy/value approximator in double precision.
pub type Approximator = rl::approximator::Mlp<f64>;
/// Rolling Sharpe tracker in double precision.
pub type Sharpe = rl::sharpe::SharpeTracker<f64>;
