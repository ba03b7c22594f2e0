//! Scenario harness behind the `smoothquad` command-line tool: config files,
//! deterministic runs, revenue comparison, plot-ready figure data and a
//! randomized axiom check.

mod axioms;
mod compare;
mod config;
mod figure;
mod trace_io;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use axioms::{run_axiom_suite, AxiomCheck, AxiomReport};
pub use compare::{compare_revenue, random_history, RevenueReport, RevenueRow, RuleTotals};
pub use config::{load_config, parse_config, LiquidityConfig, ScenarioConfig, TraderMode};
pub use figure::{emit_figure_data, simplex_xy, FigureStyle};
pub use trace_io::{failure_marker, trace_from_csv, trace_to_csv};

use crate::cost::CostFamily;
use crate::error::{Error, Result};
use crate::liquidity::{VolumeState, VpmMarket};
use crate::market::{Bundle, Ledger, Market, MarketState};
use crate::traders::{aligned_minimizer, run_convergence, trade, ConvergenceTrace, TraceRow, TraderConfig};

/// Everything a scenario produced, including a partial run.
#[derive(Debug)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub trace: ConvergenceTrace,
    pub ledger: Ledger,
    pub final_volume: Option<f64>,
    /// Round at which the run stopped, and why.
    pub failure: Option<(u64, Error)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub cost: CostFamily,
    pub l: f64,
    pub norm: String,
    pub mode: String,
    pub experimental_l1: bool,
    pub rounds_completed: u64,
    pub final_price: Vec<f64>,
    pub final_l1_gap: f64,
    pub final_suboptimality: f64,
    pub revenue: f64,
    pub worst_case_loss: f64,
    pub fee_smoothness: f64,
    pub final_volume: Option<f64>,
    pub failure: Option<String>,
}

impl ScenarioRun {
    pub fn summary(&self) -> ScenarioSummary {
        let last = self.trace.last();
        ScenarioSummary {
            name: self.config.name.clone(),
            cost: self.config.family,
            l: self.config.l,
            norm: self.trace.norm.to_string(),
            mode: self.trace.mode.clone(),
            experimental_l1: self.trace.experimental_l1,
            rounds_completed: last.t,
            final_price: last.price.clone(),
            final_l1_gap: last.l1_gap,
            final_suboptimality: last.suboptimality,
            revenue: self.ledger.revenue,
            worst_case_loss: self.ledger.worst_case_loss(),
            fee_smoothness: self.trace.smoothness,
            final_volume: self.final_volume,
            failure: self.failure.as_ref().map(|(_, e)| e.to_string()),
        }
    }

    /// Turns a stopped run into its error.
    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some((_, error)) => Err(error),
            None => Ok(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioPaths {
    pub trace: PathBuf,
    pub ledger: PathBuf,
    pub summary: PathBuf,
    /// Only for three outcomes.
    pub simplex_path: Option<PathBuf>,
}

/// Runs `config` to completion or to its first failure. Errors only when
/// the market cannot be set up.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    let cost = config.cost()?;
    let trader = config.trader()?;
    let state =
        MarketState::new(cost, config.norm, config.q0.clone())?.with_experimental_l1(config.experimental_l1);
    match config.liquidity_params()? {
        None => {
            let mut market = Market::new(state);
            let (trace, failure) = match run_convergence(&mut market, std::slice::from_ref(&trader), config.rounds) {
                Ok(trace) => (trace, None),
                Err(partial) => {
                    let round = partial.trace.last().t;
                    (partial.trace, Some((round, partial.error)))
                }
            };
            Ok(ScenarioRun { config: config.clone(), trace, ledger: market.ledger, final_volume: None, failure })
        }
        Some(params) => {
            let v0 = config.liquidity.map(|l| l.v0).unwrap_or(0.0);
            let market = VpmMarket::new(params, state, VolumeState::new(v0)?)?;
            run_vpm(config, market, &trader)
        }
    }
}

/// The trader prices the adaptive market myopically: it treats the current
/// liquidity level `a` as fixed, which turns the trade into the flat-market
/// problem at `q / a` with budget `B / a`, then scales the answer by `a`.
fn vpm_bundle(market: &VpmMarket, trader: &TraderConfig) -> Result<Bundle> {
    let a = market.params.alpha(market.volume.v);
    let scaled = scaled_state(market, a);
    let mut cfg = trader.clone();
    cfg.budget = cfg.budget.map(|b| b / a);
    let step = trade(&scaled, &cfg)?;
    Ok(Bundle(step.0.iter().map(|x| a * x).collect()))
}

fn scaled_state(market: &VpmMarket, a: f64) -> MarketState {
    MarketState { q: market.state.q.iter().map(|x| x / a).collect(), ..market.state.clone() }
}

fn run_vpm(config: &ScenarioConfig, mut market: VpmMarket, trader: &TraderConfig) -> Result<ScenarioRun> {
    let belief = trader.belief.as_slice().to_vec();
    let a0 = market.params.alpha(market.volume.v);
    let scaled0 = scaled_state(&market, a0);
    let q_star: Vec<f64> = aligned_minimizer(&scaled0, &trader.belief)?.iter().map(|x| a0 * x).collect();
    let baseline = MarketState { q: market.params.base.state_for_price(&trader.belief.0)?, ..scaled0.clone() }
        .surrogate_value(&belief);
    let row = |market: &VpmMarket, payment: f64| {
        let a = market.params.alpha(market.volume.v);
        let price = market.inst_price().into_inner();
        TraceRow {
            t: market.state.round,
            q: market.state.q.clone(),
            l1_gap: price.iter().zip(&belief).map(|(p, m)| (p - m).abs()).sum(),
            price,
            suboptimality: scaled_state(market, a).surrogate_value(&belief) - baseline,
            payment,
            revenue: market.ledger.revenue,
        }
    };
    let mut trace = ConvergenceTrace {
        belief: belief.clone(),
        norm: config.norm,
        mode: format!("{}+liquidity", trader.mode_label()),
        smoothness: market.fee_smoothness()?,
        q_star,
        experimental_l1: config.experimental_l1 && config.norm == crate::convex::NormKind::L1,
        rows: vec![row(&market, 0.0)],
    };
    let mut failure = None;
    for _ in 0..config.rounds {
        let step = vpm_bundle(&market, trader)
            .and_then(|bundle| market.apply_trade("trader-0", bundle).map(|record| record.quote.total));
        match step {
            Ok(payment) => trace.rows.push(row(&market, payment)),
            Err(error) => {
                failure = Some((market.state.round, error));
                break;
            }
        }
    }
    Ok(ScenarioRun {
        config: config.clone(),
        trace,
        final_volume: Some(market.volume.v),
        ledger: market.ledger,
        failure,
    })
}

/// Writes the trace CSV, ledger JSONL, summary JSON and, for three
/// outcomes, the simplex path CSV into `dir` as `<name>.<kind>.<ext>`.
pub fn write_outputs(run: &ScenarioRun, dir: &Path) -> Result<ScenarioPaths> {
    std::fs::create_dir_all(dir)?;
    let name = &run.config.name;
    let paths = ScenarioPaths {
        trace: dir.join(format!("{name}.trace.csv")),
        ledger: dir.join(format!("{name}.ledger.jsonl")),
        summary: dir.join(format!("{name}.summary.json")),
        simplex_path: (run.trace.belief.len() == 3).then(|| dir.join(format!("{name}.simplex.csv"))),
    };
    let mut trace = trace_to_csv(&run.trace);
    let mut ledger = run.ledger.to_jsonl()?;
    if let Some((round, error)) = &run.failure {
        trace.push_str(&failure_marker(*round, error));
        ledger.push_str(&Ledger::failure_line(*round, &error.to_string())?);
    }
    std::fs::write(&paths.trace, trace)?;
    std::fs::write(&paths.ledger, ledger)?;
    let mut summary = serde_json::to_string_pretty(&run.summary())?;
    summary.push('\n');
    std::fs::write(&paths.summary, summary)?;
    if let Some(path) = &paths.simplex_path {
        std::fs::write(path, emit_figure_data(&run.trace, FigureStyle::SimplexPath)?)?;
    }
    Ok(paths)
}
