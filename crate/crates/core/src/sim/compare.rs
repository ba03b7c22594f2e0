//! Prices one trade history under both payment rules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::market::{Bundle, Market, MarketState, PaymentRule};

/// Slack for the per-trade dominance check.
const DOMINANCE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueRow {
    pub index: usize,
    pub dcfmm: f64,
    pub smooth_quad: f64,
    pub cumulative_dcfmm: f64,
    pub cumulative_smooth_quad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleTotals {
    pub revenue: f64,
    pub worst_case_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueReport {
    pub rows: Vec<RevenueRow>,
    pub dcfmm: RuleTotals,
    pub smooth_quad: RuleTotals,
    /// Trades where the Smooth Quadratic payment fell below the
    /// cost-difference payment by more than `1e-12`.
    pub dominance_violations: Vec<usize>,
}

impl RevenueReport {
    pub fn dominates(&self) -> bool {
        self.dominance_violations.is_empty()
    }
}

/// `n` bundles with coordinates uniform on `[-1, 1]`.
pub fn random_history(d: usize, n: usize, seed: u64) -> Vec<Bundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Bundle((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())).collect()
}

/// Replays `history` from `q0` in two markets that share the cost function
/// and fee norm of `config` but charge different rules.
pub fn compare_revenue(config: &ScenarioConfig, q0: &[f64], history: &[Bundle]) -> Result<RevenueReport> {
    let cost = config.cost()?;
    if q0.len() != cost.dim() {
        return Err(Error::DimensionMismatch { expected: cost.dim(), got: q0.len() });
    }
    let state = MarketState::new(cost, config.norm, q0.to_vec())?.with_experimental_l1(config.experimental_l1);
    state.fee_smoothness()?;
    let mut dcfmm = Market::new(state.clone());
    let mut smooth = Market::new(state);
    let mut rows = Vec::with_capacity(history.len());
    let mut dominance_violations = Vec::new();
    for (index, bundle) in history.iter().enumerate() {
        let a = dcfmm.apply_trade("history", bundle.clone(), PaymentRule::Dcfmm)?.quote.total;
        let b = smooth.apply_trade("history", bundle.clone(), PaymentRule::SmoothQuad)?.quote.total;
        if b < a - DOMINANCE_SLACK {
            dominance_violations.push(index);
        }
        rows.push(RevenueRow {
            index,
            dcfmm: a,
            smooth_quad: b,
            cumulative_dcfmm: dcfmm.ledger.revenue,
            cumulative_smooth_quad: smooth.ledger.revenue,
        });
    }
    Ok(RevenueReport {
        rows,
        dcfmm: RuleTotals { revenue: dcfmm.ledger.revenue, worst_case_loss: dcfmm.ledger.worst_case_loss() },
        smooth_quad: RuleTotals { revenue: smooth.ledger.revenue, worst_case_loss: smooth.ledger.worst_case_loss() },
        dominance_violations,
    })
}
