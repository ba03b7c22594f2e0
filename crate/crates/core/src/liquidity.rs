//! Volume-parameterized markets: liquidity grows with traded volume.
//!
//! The volume-dependent cost is the perspective of the base cost,
//!
//! ```text
//! C°(q; v) = a(v) (C(q / a(v)) + R_max),   a(v) = alpha0 + kappa log(1 + v),
//! ```
//!
//! where `R_max` is the regularizer's supremum over simplex vertices (zero for
//! the entropy/softmax pair). Its price is `grad C(q / a(v))`, its
//! smoothness is `L / a(v)`, and it is nondecreasing in `v` because the
//! regularizer never exceeds `R_max` on the simplex. Volume is measured by
//! an asymmetric norm of each bundle; by default only purchases count.

use serde::{Deserialize, Serialize};

use crate::convex::{check_dim, check_finite, dot, NormKind, SimplexPoint};
use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::market::{Bundle, Ledger, MarketState, PaymentQuote, PaymentRule, TradeRecord, VolumeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AsymmetricNorm {
    /// `sum_i max(r_i, 0)`: shares bought.
    #[default]
    PositivePartL1,
}

impl AsymmetricNorm {
    pub fn eval(self, r: &[f64]) -> f64 {
        match self {
            AsymmetricNorm::PositivePartL1 => r.iter().map(|x| x.max(0.0)).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeState {
    pub v: f64,
    pub v0: f64,
}

impl VolumeState {
    pub fn new(v0: f64) -> Result<Self> {
        if !(v0 >= 0.0 && v0.is_finite()) {
            return Err(Error::InvalidInput(format!("initial volume must be nonnegative, got {v0}")));
        }
        Ok(VolumeState { v: v0, v0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiquidityParams {
    pub alpha0: f64,
    pub kappa: f64,
    pub base: CostFunction,
    pub volume_norm: AsymmetricNorm,
}

impl LiquidityParams {
    pub fn new(base: CostFunction, alpha0: f64, kappa: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha0 must be positive, got {alpha0}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidInput(format!("kappa must be nonnegative, got {kappa}")));
        }
        Ok(LiquidityParams { alpha0, kappa, base, volume_norm: AsymmetricNorm::PositivePartL1 })
    }

    /// Liquidity level `a(v)`.
    pub fn alpha(&self, v: f64) -> f64 {
        self.alpha0 + self.kappa * v.ln_1p()
    }

    /// Smoothness of `C°(.; v)` under `kind`: the base constant over `a(v)`.
    pub fn smoothness(&self, v: f64, kind: NormKind, experimental_l1: bool) -> Result<f64> {
        Ok(self.base.smoothness_with(kind, experimental_l1)? / self.alpha(v))
    }

    fn check(&self, q: &[f64], v: f64) -> Result<()> {
        check_dim(q, self.base.dim())?;
        check_finite(q, "market state")?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("volume must be nonnegative, got {v}")));
        }
        Ok(())
    }

    fn scaled(&self, q: &[f64], v: f64) -> (f64, Vec<f64>) {
        let a = self.alpha(v);
        (a, q.iter().map(|x| x / a).collect())
    }

    pub fn cost(&self, q: &[f64], v: f64) -> Result<f64> {
        self.check(q, v)?;
        let (a, scaled) = self.scaled(q, v);
        Ok(a * (self.base.cost_unchecked(&scaled) + self.base.regularizer().vertex_max()))
    }

    /// `grad_q C°(q; v) = grad C(q / a(v))`.
    pub fn grad(&self, q: &[f64], v: f64) -> Result<SimplexPoint> {
        self.check(q, v)?;
        let (_, scaled) = self.scaled(q, v);
        Ok(self.base.grad_unchecked(&scaled))
    }

    /// `C°(q; v + g(r)) - C°(q; v)`, never negative.
    pub fn liquidity_fee(&self, q: &[f64], v: f64, r: &[f64]) -> Result<f64> {
        check_dim(r, self.base.dim())?;
        let dv = self.volume_norm.eval(r);
        if dv == 0.0 || self.kappa == 0.0 {
            self.check(q, v)?;
            return Ok(0.0);
        }
        Ok((self.cost(q, v + dv)? - self.cost(q, v)?).max(0.0))
    }

    /// Smooth Quadratic payment with adaptive liquidity:
    /// `<grad C°(q; v'), r> + (L°(v)/2) ||r||^2 + liquidity fee`, where
    /// `v' = v + g(r)` and the fee constant uses the pre-trade volume.
    pub fn quote_smoothquad(
        &self,
        q: &[f64],
        v: f64,
        r: &[f64],
        kind: NormKind,
        experimental_l1: bool,
    ) -> Result<PaymentQuote> {
        self.check(q, v)?;
        check_dim(r, self.base.dim())?;
        check_finite(r, "bundle")?;
        let smoothness = self.smoothness(v, kind, experimental_l1)?;
        let post_volume = v + self.volume_norm.eval(r);
        let linear = dot(self.grad(q, post_volume)?.as_slice(), r);
        let n = kind.eval(r);
        let fee = 0.5 * smoothness * n * n + self.liquidity_fee(q, v, r)?;
        Ok(PaymentQuote::new(PaymentRule::VpmSmoothQuad, linear, fee))
    }

    /// Volume-parameterized cost-difference payment
    /// `C°(q + r; v + g(r)) - C°(q; v)`.
    pub fn quote_dcfmm(&self, q: &[f64], v: f64, r: &[f64]) -> Result<f64> {
        check_dim(r, self.base.dim())?;
        let post: Vec<f64> = q.iter().zip(r).map(|(a, b)| a + b).collect();
        Ok(self.cost(&post, v + self.volume_norm.eval(r))? - self.cost(q, v)?)
    }
}

/// Market state, volume and ledger of a volume-parameterized market.
#[derive(Debug, Clone, PartialEq)]
pub struct VpmMarket {
    pub params: LiquidityParams,
    pub state: MarketState,
    pub volume: VolumeState,
    pub ledger: Ledger,
}

impl VpmMarket {
    pub fn new(params: LiquidityParams, state: MarketState, volume: VolumeState) -> Result<Self> {
        if state.cost != params.base {
            return Err(Error::InvalidInput("market cost differs from the liquidity base cost".into()));
        }
        let ledger = Ledger::new(state.q.clone());
        Ok(VpmMarket { params, state, volume, ledger })
    }

    pub fn inst_price(&self) -> SimplexPoint {
        let (_, scaled) = self.params.scaled(&self.state.q, self.volume.v);
        self.params.base.grad_unchecked(&scaled)
    }

    /// Current fee smoothness `L / a(v)`.
    pub fn fee_smoothness(&self) -> Result<f64> {
        self.params.smoothness(self.volume.v, self.state.norm, self.state.experimental_l1)
    }

    pub fn quote(&self, r: &Bundle) -> Result<PaymentQuote> {
        self.params.quote_smoothquad(
            &self.state.q,
            self.volume.v,
            r.as_slice(),
            self.state.norm,
            self.state.experimental_l1,
        )
    }

    /// Books a trade: `q += r`, `v += g(r)`. On error nothing changes.
    pub fn apply_trade(&mut self, trader_id: &str, bundle: Bundle) -> Result<&TradeRecord> {
        let quote = self.quote(&bundle)?;
        let liquidity_fee = self.params.liquidity_fee(&self.state.q, self.volume.v, bundle.as_slice())?;
        let pre_price = self.inst_price();
        let v_pre = self.volume.v;
        for (q, r) in self.state.q.iter_mut().zip(bundle.as_slice()) {
            *q += r;
        }
        self.volume.v += self.params.volume_norm.eval(bundle.as_slice());
        let record = TradeRecord {
            round: self.state.round,
            trader_id: trader_id.to_string(),
            bundle,
            quote,
            pre_price,
            post_price: self.inst_price(),
            volume: Some(VolumeRecord { v_pre, v_post: self.volume.v, liquidity_fee }),
        };
        self.state.round += 1;
        self.ledger.push(record);
        Ok(self.ledger.records.last().expect("just pushed"))
    }
}
