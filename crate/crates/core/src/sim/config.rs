//! `key = value` scenario files.
//!
//! ```text
//! # comment
//! name = descent_l2
//! cost = softmax          # or sparsemax
//! L = 1
//! norm = l2               # l2, linf, l1
//! q0 = 10, 20, 10
//! belief = 1/6, 1/6, 2/3
//! rounds = 200
//! trader = unconstrained  # buy_only, budgeted
//! ```
//!
//! Optional keys: `budget`, `experimental_l1`, `seed`, `liquidity` (`on`/`off`)
//! with `alpha0`, `kappa`, `v0`, `output_dir`, and the solver knobs
//! `solver_max_iters` and `solver_tol`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::convex::{NormKind, SimplexPoint};
use crate::cost::{CostFamily, CostFunction};
use crate::error::{Error, Result};
use crate::liquidity::LiquidityParams;
use crate::traders::{Belief, SolverParams, TraderConfig};

const KEYS: &[&str] = &[
    "name",
    "cost",
    "L",
    "norm",
    "experimental_l1",
    "q0",
    "belief",
    "rounds",
    "trader",
    "budget",
    "seed",
    "liquidity",
    "alpha0",
    "kappa",
    "v0",
    "output_dir",
    "solver_max_iters",
    "solver_tol",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraderMode {
    Unconstrained,
    BuyOnly,
    Budgeted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiquidityConfig {
    pub alpha0: f64,
    pub kappa: f64,
    pub v0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub family: CostFamily,
    pub l: f64,
    pub norm: NormKind,
    pub experimental_l1: bool,
    pub q0: Vec<f64>,
    pub belief: Vec<f64>,
    pub rounds: usize,
    pub mode: TraderMode,
    pub budget: Option<f64>,
    pub seed: u64,
    pub liquidity: Option<LiquidityConfig>,
    pub output_dir: Option<PathBuf>,
    pub solver: SolverParams,
}

impl ScenarioConfig {
    pub fn dim(&self) -> usize {
        self.q0.len()
    }

    pub fn cost(&self) -> Result<CostFunction> {
        CostFunction::new(self.family, self.l, self.dim())
    }

    pub fn trader(&self) -> Result<TraderConfig> {
        let belief = Belief(SimplexPoint::new(self.belief.clone())?);
        let mut cfg = match self.mode {
            TraderMode::Unconstrained => TraderConfig::unconstrained(belief, self.norm),
            TraderMode::BuyOnly => TraderConfig::buy_only(belief, self.norm),
            TraderMode::Budgeted => {
                let b = self.budget.ok_or_else(|| Error::Validation("budgeted trader needs `budget`".into()))?;
                TraderConfig::budgeted(belief, self.norm, b)
            }
        };
        cfg.solver = self.solver;
        Ok(cfg)
    }

    pub fn liquidity_params(&self) -> Result<Option<LiquidityParams>> {
        self.liquidity
            .map(|lc| LiquidityParams::new(self.cost()?, lc.alpha0, lc.kappa))
            .transpose()
    }

    /// Cross-field checks: dimensions, simplex membership, norm support.
    pub fn validate(&self) -> Result<()> {
        let cost = self.cost().map_err(|e| Error::Validation(e.to_string()))?;
        if self.belief.len() != self.dim() {
            return Err(Error::Validation(format!(
                "belief has {} entries but q0 has {}",
                self.belief.len(),
                self.dim()
            )));
        }
        let belief = SimplexPoint::new(self.belief.clone()).map_err(|e| Error::Validation(e.to_string()))?;
        if self.family == CostFamily::Softmax && !belief.is_interior() {
            return Err(Error::Validation("softmax prices are interior, so the belief must be too".into()));
        }
        cost.smoothness_with(self.norm, self.experimental_l1)
            .map_err(|e| Error::Validation(e.to_string()))?;
        if self.rounds == 0 {
            return Err(Error::Validation("rounds must be at least 1".into()));
        }
        match (self.mode, self.budget) {
            (TraderMode::Budgeted, None) => {
                return Err(Error::Validation("budgeted trader needs `budget`".into()));
            }
            (TraderMode::Budgeted, Some(b)) if !(b > 0.0 && b.is_finite()) => {
                return Err(Error::Validation(format!("budget must be positive, got {b}")));
            }
            (m, Some(_)) if m != TraderMode::Budgeted => {
                return Err(Error::Validation("`budget` is only meaningful with trader = budgeted".into()));
            }
            _ => {}
        }
        if let Some(lc) = self.liquidity {
            LiquidityParams::new(cost, lc.alpha0, lc.kappa).map_err(|e| Error::Validation(e.to_string()))?;
            if !(lc.v0 >= 0.0 && lc.v0.is_finite()) {
                return Err(Error::Validation(format!("v0 must be nonnegative, got {}", lc.v0)));
            }
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iters == 0 {
            return Err(Error::Validation("solver_tol and solver_max_iters must be positive".into()));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if cfg.name.is_empty() {
        cfg.name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario").to_string();
    }
    Ok(cfg)
}

struct Entry {
    line: usize,
    value: String,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse { line, message: format!("unknown key `{key}`") });
        }
        if entries.contains_key(key) {
            return Err(Error::Parse { line, message: format!("duplicate key `{key}`") });
        }
        entries.insert(key.to_string(), Entry { line, value: value.trim().to_string() });
    }
    let get = |key: &str| entries.get(key);
    let required = |key: &str| {
        get(key).ok_or_else(|| Error::Validation(format!("missing required key `{key}`")))
    };

    let family = parse_with(required("cost")?, |v| v.parse::<CostFamily>())?;
    let l = parse_number(required("L")?)?;
    let norm = parse_with(required("norm")?, |v| v.parse::<NormKind>())?;
    let q0 = parse_vector(required("q0")?)?;
    let belief = parse_vector(required("belief")?)?;
    let rounds = parse_with(required("rounds")?, |v| v.parse::<usize>().map_err(|e| e.to_string()))?;
    let mode = match get("trader") {
        None => TraderMode::Unconstrained,
        Some(e) => parse_with(e, |v| match v {
            "unconstrained" => Ok(TraderMode::Unconstrained),
            "buy_only" => Ok(TraderMode::BuyOnly),
            "budgeted" => Ok(TraderMode::Budgeted),
            other => Err(format!("unknown trader `{other}`")),
        })?,
    };
    let budget = get("budget").map(parse_number).transpose()?;
    let experimental_l1 = get("experimental_l1").map(parse_bool).transpose()?.unwrap_or(false);
    let seed = get("seed")
        .map(|e| parse_with(e, |v| v.parse::<u64>().map_err(|e| e.to_string())))
        .transpose()?
        .unwrap_or(0);
    let liquidity_on = get("liquidity").map(parse_bool).transpose()?.unwrap_or(false);
    let liquidity_keys = ["alpha0", "kappa", "v0"];
    let liquidity = if liquidity_on {
        Some(LiquidityConfig {
            alpha0: get("alpha0").map(parse_number).transpose()?.unwrap_or(1.0),
            kappa: get("kappa").map(parse_number).transpose()?.unwrap_or(1.0),
            v0: get("v0").map(parse_number).transpose()?.unwrap_or(0.0),
        })
    } else {
        if let Some(key) = liquidity_keys.iter().find(|k| entries.contains_key(**k)) {
            return Err(Error::Parse {
                line: entries[*key].line,
                message: format!("`{key}` needs `liquidity = on`"),
            });
        }
        None
    };
    let defaults = SolverParams::default();
    let solver = SolverParams {
        max_iters: get("solver_max_iters")
            .map(|e| parse_with(e, |v| v.parse::<usize>().map_err(|e| e.to_string())))
            .transpose()?
            .unwrap_or(defaults.max_iters),
        tol: get("solver_tol").map(parse_number).transpose()?.unwrap_or(defaults.tol),
    };
    let cfg = ScenarioConfig {
        name: get("name").map(|e| e.value.clone()).unwrap_or_default(),
        family,
        l,
        norm,
        experimental_l1,
        q0,
        belief,
        rounds,
        mode,
        budget,
        seed,
        liquidity,
        output_dir: get("output_dir").map(|e| PathBuf::from(&e.value)),
        solver,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_with<T, E: ToString>(entry: &Entry, f: impl Fn(&str) -> std::result::Result<T, E>) -> Result<T> {
    f(&entry.value).map_err(|e| Error::Parse { line: entry.line, message: e.to_string() })
}

fn parse_bool(entry: &Entry) -> Result<bool> {
    parse_with(entry, |v| match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        other => Err(format!("expected on/off, got `{other}`")),
    })
}

fn parse_number(entry: &Entry) -> Result<f64> {
    parse_with(entry, parse_scalar)
}

fn parse_vector(entry: &Entry) -> Result<Vec<f64>> {
    parse_with(entry, |v| v.split(',').map(|t| parse_scalar(t.trim())).collect::<std::result::Result<Vec<_>, _>>())
}

/// A float or a fraction `a/b`.
fn parse_scalar(token: &str) -> std::result::Result<f64, String> {
    let bad = || format!("`{token}` is not a number");
    let x = match token.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => token.parse().map_err(|_| bad())?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}
