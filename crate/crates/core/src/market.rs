//! The automated market maker: state, quotes under the two payment rules,
//! the trade ledger and settlement.
//!
//! Quotes never mutate anything. [`Market::apply_trade`] is the only place
//! where shares move and revenue is booked.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::convex::{bregman, check_dim, check_finite, dot, NormKind, SimplexPoint};
use crate::cost::CostFunction;
use crate::error::{Error, Result};

/// A signed request for shares, one entry per outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle(pub Vec<f64>);

impl Bundle {
    pub fn zeros(d: usize) -> Self {
        Bundle(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

impl From<Vec<f64>> for Bundle {
    fn from(v: Vec<f64>) -> Self {
        Bundle(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentRule {
    /// `C(q + r) - C(q)`.
    Dcfmm,
    /// `<grad C(q), r> + (L/2) ||r||^2`.
    SmoothQuad,
    /// Smooth Quadratic payment with volume-dependent liquidity.
    VpmSmoothQuad,
}

impl fmt::Display for PaymentRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaymentRule::Dcfmm => "dcfmm",
            PaymentRule::SmoothQuad => "smooth_quad",
            PaymentRule::VpmSmoothQuad => "vpm_smooth_quad",
        })
    }
}

/// A payment split into the linear price term and the fee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaymentQuote {
    pub rule: PaymentRule,
    pub linear_part: f64,
    pub fee_part: f64,
    pub total: f64,
}

impl PaymentQuote {
    pub(crate) fn new(rule: PaymentRule, linear_part: f64, fee_part: f64) -> Self {
        PaymentQuote { rule, linear_part, fee_part, total: linear_part + fee_part }
    }
}

/// Volume bookkeeping attached to trades on a volume-parameterized market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeRecord {
    pub v_pre: f64,
    pub v_post: f64,
    pub liquidity_fee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub round: u64,
    pub trader_id: String,
    pub bundle: Bundle,
    pub quote: PaymentQuote,
    pub pre_price: SimplexPoint,
    pub post_price: SimplexPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub q: Vec<f64>,
    pub round: u64,
    pub cost: CostFunction,
    /// Norm of the quadratic fee.
    pub norm: NormKind,
    /// Allow the l1 fee norm even where no smoothness constant is registered.
    pub experimental_l1: bool,
}

impl MarketState {
    pub fn new(cost: CostFunction, norm: NormKind, q0: Vec<f64>) -> Result<Self> {
        check_dim(&q0, cost.dim())?;
        check_finite(&q0, "initial state")?;
        Ok(MarketState { q: q0, round: 0, cost, norm, experimental_l1: false })
    }

    pub fn with_experimental_l1(mut self, enabled: bool) -> Self {
        self.experimental_l1 = enabled;
        self
    }

    pub fn dim(&self) -> usize {
        self.cost.dim()
    }

    /// Smoothness constant used by the quadratic fee.
    pub fn fee_smoothness(&self) -> Result<f64> {
        self.cost.smoothness_with(self.norm, self.experimental_l1)
    }

    pub fn inst_price(&self) -> SimplexPoint {
        self.cost.grad_unchecked(&self.q)
    }

    fn check_bundle(&self, bundle: &Bundle) -> Result<()> {
        check_dim(bundle.as_slice(), self.dim())?;
        check_finite(bundle.as_slice(), "bundle")
    }

    pub fn quote_dcfmm(&self, bundle: &Bundle) -> Result<PaymentQuote> {
        self.check_bundle(bundle)?;
        let r = bundle.as_slice();
        let post: Vec<f64> = self.q.iter().zip(r).map(|(a, b)| a + b).collect();
        let linear = dot(self.inst_price().as_slice(), r);
        let fee = bregman(&self.cost, &post, &self.q)?;
        // Total is the exact cost difference; the split is for reporting.
        let total = self.cost.cost_unchecked(&post) - self.cost.cost_unchecked(&self.q);
        Ok(PaymentQuote { rule: PaymentRule::Dcfmm, linear_part: linear, fee_part: fee.max(0.0), total })
    }

    pub fn quote_smoothquad(&self, bundle: &Bundle) -> Result<PaymentQuote> {
        self.check_bundle(bundle)?;
        let smoothness = self.fee_smoothness()?;
        let r = bundle.as_slice();
        let linear = dot(self.inst_price().as_slice(), r);
        let n = self.norm.eval(r);
        Ok(PaymentQuote::new(PaymentRule::SmoothQuad, linear, 0.5 * smoothness * n * n))
    }

    pub fn quote(&self, bundle: &Bundle, rule: PaymentRule) -> Result<PaymentQuote> {
        match rule {
            PaymentRule::Dcfmm => self.quote_dcfmm(bundle),
            PaymentRule::SmoothQuad => self.quote_smoothquad(bundle),
            PaymentRule::VpmSmoothQuad => Err(Error::InvalidInput(
                "volume-parameterized quotes need a VpmMarket".into(),
            )),
        }
    }

    /// `C(q) - <mu, q>`, the potential traders descend.
    pub fn surrogate_value(&self, belief: &[f64]) -> f64 {
        self.cost.cost_unchecked(&self.q) - dot(belief, &self.q)
    }
}

/// Ordered trade history with running revenue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub initial_q: Vec<f64>,
    pub records: Vec<TradeRecord>,
    pub revenue: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LedgerLine {
    Header { initial_q: Vec<f64> },
    Trade(TradeRecord),
    Failure { round: u64, message: String },
}

impl Ledger {
    pub fn new(initial_q: Vec<f64>) -> Self {
        Ledger { initial_q, records: Vec::new(), revenue: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.initial_q.len()
    }

    pub(crate) fn push(&mut self, record: TradeRecord) {
        self.revenue += record.quote.total;
        self.records.push(record);
    }

    /// Sum of all bundles traded so far.
    pub fn net_bundle(&self) -> Vec<f64> {
        let mut net = vec![0.0; self.dim()];
        for record in &self.records {
            for (n, r) in net.iter_mut().zip(record.bundle.as_slice()) {
                *n += r;
            }
        }
        net
    }

    /// Settles every trade against outcome `outcome` (0-based).
    pub fn settle(&self, outcome: usize) -> Result<SettlementReport> {
        if outcome >= self.dim() {
            return Err(Error::InvalidOutcome { index: outcome, dimension: self.dim() });
        }
        let per_record: Vec<f64> = self.records.iter().map(|r| r.bundle.0[outcome]).collect();
        let mut per_trader = BTreeMap::new();
        for (record, payout) in self.records.iter().zip(&per_record) {
            *per_trader.entry(record.trader_id.clone()).or_insert(0.0) += payout;
        }
        let total_payout: f64 = per_record.iter().sum();
        Ok(SettlementReport {
            outcome,
            revenue: self.revenue,
            total_payout,
            pnl: self.revenue - total_payout,
            per_record,
            per_trader,
        })
    }

    /// Largest market-maker loss over all outcomes; zero for an empty ledger.
    pub fn worst_case_loss(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.net_bundle().iter().map(|payout| payout - self.revenue).fold(f64::NEG_INFINITY, f64::max)
    }

    /// One JSON object per line: a header with the initial state, then one
    /// line per trade.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&LedgerLine::Header { initial_q: self.initial_q.clone() })?;
        out.push('\n');
        for record in &self.records {
            out.push_str(&serde_json::to_string(&LedgerLine::Trade(record.clone()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub(crate) fn failure_line(round: u64, message: &str) -> Result<String> {
        let mut line = serde_json::to_string(&LedgerLine::Failure { round, message: message.into() })?;
        line.push('\n');
        Ok(line)
    }

    /// Parses [`to_jsonl`](Self::to_jsonl) output. Failure marker lines are
    /// skipped; revenue is recomputed from the records.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut ledger: Option<Ledger> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LedgerLine = serde_json::from_str(line)
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            match parsed {
                LedgerLine::Header { initial_q } => {
                    if ledger.is_some() {
                        return Err(Error::Parse { line: i + 1, message: "duplicate ledger header".into() });
                    }
                    ledger = Some(Ledger::new(initial_q));
                }
                LedgerLine::Trade(record) => {
                    let l = ledger.as_mut().ok_or_else(|| Error::Parse {
                        line: i + 1,
                        message: "trade before ledger header".into(),
                    })?;
                    check_dim(record.bundle.as_slice(), l.dim())?;
                    l.push(record);
                }
                LedgerLine::Failure { .. } => {}
            }
        }
        ledger.ok_or_else(|| Error::Parse { line: 0, message: "missing ledger header".into() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettlementReport {
    pub outcome: usize,
    pub revenue: f64,
    pub total_payout: f64,
    /// Revenue minus payout; negative when the market maker loses money.
    pub pnl: f64,
    pub per_record: Vec<f64>,
    pub per_trader: BTreeMap<String, f64>,
}

/// A market state together with its ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub state: MarketState,
    pub ledger: Ledger,
}

impl Market {
    pub fn new(state: MarketState) -> Self {
        let ledger = Ledger::new(state.q.clone());
        Market { state, ledger }
    }

    /// Quotes, books and applies a trade. On error nothing changes.
    pub fn apply_trade(&mut self, trader_id: &str, bundle: Bundle, rule: PaymentRule) -> Result<&TradeRecord> {
        let quote = self.state.quote(&bundle, rule)?;
        let pre_price = self.state.inst_price();
        for (q, r) in self.state.q.iter_mut().zip(bundle.as_slice()) {
            *q += r;
        }
        let post_price = self.state.inst_price();
        let record = TradeRecord {
            round: self.state.round,
            trader_id: trader_id.to_string(),
            bundle,
            quote,
            pre_price,
            post_price,
            volume: None,
        };
        self.state.round += 1;
        self.ledger.push(record);
        Ok(self.ledger.records.last().expect("just pushed"))
    }
}
