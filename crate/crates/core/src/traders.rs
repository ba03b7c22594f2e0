//! Expectation-maximising trader agents for the Smooth Quadratic market.
//!
//! A trader with belief `mu` facing state `q` solves
//!
//! ```text
//! max_r  <mu, r> - <grad C(q), r> - (L/2) ||r||^2
//! ```
//!
//! which is one steepest-descent step on `C(q) - <mu, q>` under the fee norm.
//! Buy-only traders add `r >= 0`; budget-bounded traders require their
//! realised loss `Pay(q, r) - r_y` to stay below `B` for every outcome `y`.

use serde::{Deserialize, Serialize};

use crate::convex::{check_dim, dot, NormKind, SimplexPoint};
use crate::error::{Error, Result};
use crate::market::{Bundle, Market, MarketState, PaymentRule};

/// A trader's subjective distribution over outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(pub SimplexPoint);

impl Belief {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(p).map(Belief)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Settings for the budget-constrained solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Cap on multiplier evaluations.
    pub max_iters: usize,
    /// Largest slack accepted on the budget when the cap is reached.
    pub tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { max_iters: 10_000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraderConfig {
    pub belief: Belief,
    /// Must match the market's fee norm.
    pub norm: NormKind,
    pub budget: Option<f64>,
    pub buy_only: bool,
    pub solver: SolverParams,
}

impl TraderConfig {
    pub fn unconstrained(belief: Belief, norm: NormKind) -> Self {
        TraderConfig { belief, norm, budget: None, buy_only: false, solver: SolverParams::default() }
    }

    pub fn buy_only(belief: Belief, norm: NormKind) -> Self {
        TraderConfig { buy_only: true, ..Self::unconstrained(belief, norm) }
    }

    pub fn budgeted(belief: Belief, norm: NormKind, budget: f64) -> Self {
        TraderConfig { budget: Some(budget), ..Self::unconstrained(belief, norm) }
    }

    pub fn mode_label(&self) -> &'static str {
        match (self.budget.is_some(), self.buy_only) {
            (false, false) => "unconstrained",
            (false, true) => "buy_only",
            (true, false) => "budgeted",
            (true, true) => "budgeted_buy_only",
        }
    }

    fn validate(&self, state: &MarketState) -> Result<f64> {
        check_dim(self.belief.as_slice(), state.dim())?;
        if self.norm != state.norm {
            return Err(Error::InvalidInput(format!(
                "trader norm {} differs from the market fee norm {}",
                self.norm, state.norm
            )));
        }
        if let Some(b) = self.budget {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidInput(format!("budget must be positive, got {b}")));
            }
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iters == 0 {
            return Err(Error::InvalidInput("solver tolerance and iteration cap must be positive".into()));
        }
        state.fee_smoothness()
    }
}

/// `grad C(q) - mu`, the gradient of the trader's surrogate objective.
pub fn surrogate_grad(state: &MarketState, belief: &Belief) -> Vec<f64> {
    state.inst_price().as_slice().iter().zip(belief.as_slice()).map(|(p, m)| p - m).collect()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact minimiser of `<g, r> + (L/2) ||r||^2` under `kind`.
///
/// l1 moves a single coordinate: the smallest index attaining `max |g_i|`.
pub fn steepest_step(g: &[f64], l: f64, kind: NormKind) -> Bundle {
    let r = match kind {
        NormKind::L2 => g.iter().map(|x| -x / l).collect(),
        NormKind::LInf => {
            let scale = NormKind::L1.eval(g) / l;
            g.iter().map(|&x| -scale * sign(x)).collect()
        }
        NormKind::L1 => {
            let mut r = vec![0.0; g.len()];
            let mut best: Option<usize> = None;
            for (i, x) in g.iter().enumerate() {
                if best.is_none_or(|b| x.abs() > g[b].abs()) {
                    best = Some(i);
                }
            }
            if let Some(j) = best {
                r[j] = -(g[j].abs() / l) * sign(g[j]);
            }
            r
        }
    };
    Bundle(r)
}

/// `<mu, r> - Pay_L(q, r)`.
pub fn expected_return(state: &MarketState, belief: &Belief, bundle: &Bundle) -> Result<f64> {
    let quote = state.quote_smoothquad(bundle)?;
    Ok(dot(belief.as_slice(), bundle.as_slice()) - quote.total)
}

pub fn trade_unconstrained(state: &MarketState, config: &TraderConfig) -> Result<Bundle> {
    let l = config.validate(state)?;
    Ok(steepest_step(&surrogate_grad(state, &config.belief), l, state.norm))
}

/// Best bundle with `r >= 0`.
///
/// For l2 this is `(c_+ - c) / L` with `c = grad C(q) - mu`. The l1 and l-inf
/// problems also have closed forms: l1 buys only the most underpriced
/// outcome, l-inf buys the same amount `sum(c_-)/L` of every underpriced one.
pub fn trade_buy_only(state: &MarketState, config: &TraderConfig) -> Result<Bundle> {
    let l = config.validate(state)?;
    Ok(buy_only_step(&surrogate_grad(state, &config.belief), l, state.norm))
}

pub fn buy_only_step(c: &[f64], l: f64, kind: NormKind) -> Bundle {
    let r = match kind {
        NormKind::L2 => c.iter().map(|&x| (x.max(0.0) - x) / l).collect(),
        NormKind::L1 => {
            let mut r = vec![0.0; c.len()];
            let mut best: Option<usize> = None;
            for (i, &x) in c.iter().enumerate() {
                if x < 0.0 && best.is_none_or(|b| x < c[b]) {
                    best = Some(i);
                }
            }
            if let Some(j) = best {
                r[j] = -c[j] / l;
            }
            r
        }
        NormKind::LInf => {
            let level: f64 = c.iter().filter(|&&x| x < 0.0).map(|x| -x).sum::<f64>() / l;
            c.iter().map(|&x| if x < 0.0 { level } else { 0.0 }).collect()
        }
    };
    Bundle(r)
}

/// Largest absolute residual of each KKT condition of the l2 buy-only
/// program `min <c,r> + (L/2)||r||^2 s.t. r >= 0` at `(r, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub complementary_slackness: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.complementary_slackness)
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
    }
}

/// Residuals at the closed-form certificate `lambda = c_+`.
pub fn buy_only_kkt(c: &[f64], r: &[f64], l: f64) -> KktResiduals {
    let lambda: Vec<f64> = c.iter().map(|x| x.max(0.0)).collect();
    let mut res = KktResiduals {
        stationarity: 0.0,
        complementary_slackness: 0.0,
        primal_feasibility: 0.0,
        dual_feasibility: 0.0,
    };
    for ((ci, ri), li) in c.iter().zip(r).zip(&lambda) {
        res.stationarity = res.stationarity.max((ci + l * ri - li).abs());
        res.complementary_slackness = res.complementary_slackness.max((li * ri).abs());
        res.primal_feasibility = res.primal_feasibility.max((-ri).max(0.0));
        res.dual_feasibility = res.dual_feasibility.max((-li).max(0.0));
    }
    res
}

/// Output of the budget-constrained solver.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSolution {
    pub bundle: Bundle,
    /// One multiplier per outcome constraint (all zero when inactive).
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    /// Largest `Pay(q, r) - r_y - B` over outcomes.
    pub max_violation: f64,
    /// False when the returned bundle is a feasible scaling of the
    /// unconstrained step rather than the constrained optimum.
    pub exact: bool,
}

/// Realised loss `<p, r> + (L/2)||r||^2 - r_y` for every outcome `y`.
pub fn realized_losses(price: &[f64], r: &[f64], l: f64, kind: NormKind) -> Vec<f64> {
    let n = kind.eval(r);
    let pay = dot(price, r) + 0.5 * l * n * n;
    r.iter().map(|ry| pay - ry).collect()
}

/// Largest `theta` in `[0, 1]` with `theta * r` inside the budget.
fn feasible_scale(price: &[f64], r: &[f64], l: f64, kind: NormKind, budget: f64) -> f64 {
    // loss_y(theta r) = a theta^2 + b_y theta, convex with value 0 at 0 < B.
    let n = kind.eval(r);
    let a = 0.5 * l * n * n;
    let linear = dot(price, r);
    let mut theta: f64 = 1.0;
    for ry in r {
        let b = linear - ry;
        let root = if a > 0.0 {
            (-b + (b * b + 4.0 * a * budget).sqrt()) / (2.0 * a)
        } else if b > 0.0 {
            budget / b
        } else {
            f64::INFINITY
        };
        theta = theta.min(root);
    }
    // Guard the last ulp so the scaled bundle is feasible in floating point.
    while theta > 0.0 {
        let scaled: Vec<f64> = r.iter().map(|x| x * theta).collect();
        let worst = realized_losses(price, &scaled, l, kind).into_iter().fold(f64::NEG_INFINITY, f64::max);
        if worst <= budget {
            break;
        }
        theta = (theta * (1.0 - 1e-12)).min(theta - f64::EPSILON);
    }
    theta.max(0.0)
}

/// Exact solver for
/// `min <c,r> + (L/2)||r||_2^2  s.t.  <p - e_y, r> + (L/2)||r||_2^2 <= B  for all y`.
///
/// For a total multiplier `s`, the best split across outcomes projects
/// `v = c + s p` onto `{lambda >= 0, sum lambda = s}` and gives
/// `r(s) = -(v - lambda) / (L (1 + s))`. The dual restricted to that split is
/// concave in `s` and its slope is the largest constraint value at `r(s)`,
/// so `s` is located by doubling and then bisection.
pub fn budgeted_step_l2(
    c: &[f64],
    price: &[f64],
    l: f64,
    budget: f64,
    params: &SolverParams,
) -> Result<BudgetSolution> {
    let d = c.len();
    let worst_excess = |r: &[f64]| -> f64 {
        realized_losses(price, r, l, NormKind::L2).into_iter().fold(f64::NEG_INFINITY, f64::max) - budget
    };
    let unconstrained: Vec<f64> = c.iter().map(|x| -x / l).collect();
    let h0 = worst_excess(&unconstrained);
    if h0 <= 0.0 {
        return Ok(BudgetSolution {
            max_violation: h0,
            bundle: Bundle(unconstrained),
            multipliers: vec![0.0; d],
            iterations: 0,
            exact: true,
        });
    }

    let eval = |s: f64| -> (Vec<f64>, Vec<f64>, f64) {
        let v: Vec<f64> = c.iter().zip(price).map(|(ci, pi)| ci + s * pi).collect();
        let lambda = capped_split(&v, s);
        let denom = l * (1.0 + s);
        let r: Vec<f64> = v.iter().zip(&lambda).map(|(vi, li)| -(vi - li) / denom).collect();
        let h = worst_excess(&r);
        (r, lambda, h)
    };

    let mut iterations = 0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut upper = eval(hi);
    while upper.2 > 0.0 {
        iterations += 1;
        if iterations >= params.max_iters || hi > 1e150 {
            let theta = feasible_scale(price, &upper.0, l, NormKind::L2, budget);
            return Err(Error::SolverFailure {
                iterations,
                violation: upper.2,
                best_feasible: upper.0.iter().map(|x| x * theta).collect(),
            });
        }
        lo = hi;
        hi *= 2.0;
        upper = eval(hi);
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if iterations >= params.max_iters {
            if upper.2 >= -params.tol {
                break;
            }
            return Err(Error::SolverFailure { iterations, violation: 0.0, best_feasible: upper.0 });
        }
        iterations += 1;
        let probe = eval(mid);
        if probe.2 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            upper = probe;
        }
    }
    let (r, lambda, h) = upper;
    Ok(BudgetSolution { bundle: Bundle(r), multipliers: lambda, iterations, max_violation: h, exact: true })
}

/// `lambda_i = max(0, v_i - tau)` with `sum lambda = total > 0`.
fn capped_split(v: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = sorted[0] - total;
    for (k, x) in sorted.iter().enumerate() {
        cum += x;
        let candidate = (cum - total) / (k + 1) as f64;
        if x - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Budget-bounded trade. l2 markets use [`budgeted_step_l2`]; other norms
/// (and buy-only budgeted traders) shrink their unconstrained step onto the
/// budget boundary, which is feasible but not the constrained optimum.
pub fn trade_budgeted(state: &MarketState, config: &TraderConfig) -> Result<BudgetSolution> {
    let l = config.validate(state)?;
    let budget = config
        .budget
        .ok_or_else(|| Error::InvalidInput("trade_budgeted needs a budget".into()))?;
    let price = state.inst_price();
    let c = surrogate_grad(state, &config.belief);
    if state.norm == NormKind::L2 && !config.buy_only {
        return budgeted_step_l2(&c, price.as_slice(), l, budget, &config.solver);
    }
    let direction = if config.buy_only {
        buy_only_step(&c, l, state.norm)
    } else {
        steepest_step(&c, l, state.norm)
    };
    let theta = feasible_scale(price.as_slice(), direction.as_slice(), l, state.norm, budget);
    let r: Vec<f64> = direction.as_slice().iter().map(|x| x * theta).collect();
    let worst = realized_losses(price.as_slice(), &r, l, state.norm)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BudgetSolution {
        bundle: Bundle(r),
        multipliers: vec![0.0; state.dim()],
        iterations: 0,
        max_violation: worst - budget,
        exact: theta >= 1.0,
    })
}

/// The bundle a trader submits at `state`.
pub fn trade(state: &MarketState, config: &TraderConfig) -> Result<Bundle> {
    if config.budget.is_some() {
        trade_budgeted(state, config).map(|s| s.bundle)
    } else if config.buy_only {
        trade_buy_only(state, config)
    } else {
        trade_unconstrained(state, config)
    }
}

/// One row of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub q: Vec<f64>,
    pub price: Vec<f64>,
    /// `||grad C(q_t) - mu||_1`.
    pub l1_gap: f64,
    /// `Cbar(q_t) - Cbar(q*)` with `Cbar(q) = C(q) - <mu, q>`.
    pub suboptimality: f64,
    pub payment: f64,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub belief: Vec<f64>,
    pub norm: NormKind,
    pub mode: String,
    pub smoothness: f64,
    /// Minimiser of `Cbar` shifted along `1` to be l2-closest to `q_0`.
    pub q_star: Vec<f64>,
    pub experimental_l1: bool,
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace always holds round 0")
    }

    /// `L ||q_0 - q*||_2^2 / (2 t)`, the gradient-descent rate.
    pub fn gd_envelope(&self, t: u64) -> f64 {
        let q0 = &self.rows[0].q;
        let diff: Vec<f64> = q0.iter().zip(&self.q_star).map(|(a, b)| a - b).collect();
        self.smoothness * dot(&diff, &diff) / (2.0 * t as f64)
    }

    /// Largest distance from any traced state to the minimiser line under
    /// the trading norm; stands in for the sublevel-set radius `K`.
    pub fn empirical_radius(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let diff: Vec<f64> = row.q.iter().zip(&self.q_star).map(|(a, b)| a - b).collect();
                self.norm.distance_to_ones_line(&diff)
            })
            .fold(0.0, f64::max)
    }

    /// `2 L K^2 / (t + 4)`, the steepest-descent rate with empirical `K`.
    pub fn sd_envelope(&self, t: u64) -> f64 {
        let k = self.empirical_radius();
        2.0 * self.smoothness * k * k / (t as f64 + 4.0)
    }
}

/// A run that stopped early; `trace` holds every completed round.
#[derive(Debug)]
pub struct PartialRun {
    pub trace: ConvergenceTrace,
    pub error: Error,
}

impl From<PartialRun> for Error {
    fn from(p: PartialRun) -> Self {
        p.error
    }
}

/// `q*` for belief `mu`, shifted along `1` to minimise `||q_0 - q*||_2`.
pub fn aligned_minimizer(state: &MarketState, belief: &Belief) -> Result<Vec<f64>> {
    let mut q_star = state.cost.state_for_price(&belief.0)?;
    let shift = state.q.iter().zip(&q_star).map(|(a, b)| a - b).sum::<f64>() / q_star.len() as f64;
    q_star.iter_mut().for_each(|x| *x += shift);
    Ok(q_star)
}

fn trace_row(market: &Market, belief: &Belief, baseline: f64, payment: f64) -> TraceRow {
    let state = &market.state;
    let price = state.inst_price().into_inner();
    let l1_gap = price.iter().zip(belief.as_slice()).map(|(p, m)| (p - m).abs()).sum();
    TraceRow {
        t: state.round,
        q: state.q.clone(),
        price,
        l1_gap,
        suboptimality: state.surrogate_value(belief.as_slice()) - baseline,
        payment,
        revenue: market.ledger.revenue,
    }
}

/// Lets `traders` (cycled in order) trade for `rounds` rounds under the
/// Smooth Quadratic rule and records the trajectory. The first trader's
/// belief is the reference for gaps and suboptimality.
pub fn run_convergence(
    market: &mut Market,
    traders: &[TraderConfig],
    rounds: usize,
) -> std::result::Result<ConvergenceTrace, PartialRun> {
    let first = traders.first().ok_or_else(|| PartialRun {
        trace: empty_trace(market),
        error: Error::InvalidInput("need at least one trader".into()),
    })?;
    let belief = first.belief.clone();
    let setup = (|| -> Result<(f64, Vec<f64>)> {
        if rounds == 0 {
            return Err(Error::InvalidInput("need at least one round".into()));
        }
        let smoothness = first.validate(&market.state)?;
        let q_star = aligned_minimizer(&market.state, &belief)?;
        Ok((smoothness, q_star))
    })();
    let (smoothness, q_star) = setup.map_err(|error| PartialRun { trace: empty_trace(market), error })?;
    let baseline = {
        let probe = MarketState { q: q_star.clone(), ..market.state.clone() };
        probe.surrogate_value(belief.as_slice())
    };
    let mut trace = ConvergenceTrace {
        belief: belief.as_slice().to_vec(),
        norm: market.state.norm,
        mode: first.mode_label().to_string(),
        smoothness,
        q_star,
        experimental_l1: market.state.experimental_l1 && market.state.norm == NormKind::L1,
        rows: vec![trace_row(market, &belief, baseline, 0.0)],
    };
    for round in 0..rounds {
        let index = round % traders.len();
        let step = trade(&market.state, &traders[index]).and_then(|bundle| {
            market
                .apply_trade(&format!("trader-{index}"), bundle, PaymentRule::SmoothQuad)
                .map(|record| record.quote.total)
        });
        match step {
            Ok(payment) => trace.rows.push(trace_row(market, &belief, baseline, payment)),
            Err(error) => return Err(PartialRun { trace, error }),
        }
    }
    Ok(trace)
}

fn empty_trace(market: &Market) -> ConvergenceTrace {
    ConvergenceTrace {
        belief: Vec::new(),
        norm: market.state.norm,
        mode: String::new(),
        smoothness: 0.0,
        q_star: Vec::new(),
        experimental_l1: false,
        rows: Vec::new(),
    }
}
