//! Cost-function prediction market makers for Arrow-Debreu securities.
//!
//! The crate prices bundles of `d` mutually exclusive outcome securities with
//! two rules built on the same convex cost function `C`:
//!
//! - the duality-based cost function market maker (DCFMM), which charges the
//!   cost difference `C(q + r) - C(q)`, and
//! - the Smooth Quadratic market, which charges the instantaneous price plus a
//!   quadratic fee `<grad C(q), r> + (L/2) ||r||^2`.
//!
//! Traders that maximise expected return against the Smooth Quadratic rule
//! take steepest-descent steps on `C(q) - <mu, q>`, so repeated trading drives
//! the market price to the shared belief `mu`. The [`traders`] module builds
//! those agents (unconstrained, buy-only and budget-bounded), [`liquidity`]
//! adds volume-dependent liquidity, and [`sim`] is the scenario harness behind
//! the `smoothquad` binary.

pub mod convex;
pub mod cost;
mod error;
pub mod liquidity;
pub mod market;
pub mod sim;
pub mod traders;

pub use convex::{NormKind, SimplexPoint};
pub use cost::{CostFamily, CostFunction, Regularizer};
pub use error::{Error, Result};
pub use liquidity::{AsymmetricNorm, LiquidityParams, VolumeState, VpmMarket};
pub use market::{Bundle, Ledger, Market, MarketState, PaymentQuote, PaymentRule, TradeRecord};
pub use traders::{Belief, SolverParams, TraderConfig};
