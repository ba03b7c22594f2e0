//! Randomized check of the market-maker axioms for the Smooth Quadratic rule.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex::{NormKind, SIMPLEX_TOL};
use crate::cost::{CostFamily, CostFunction};
use crate::market::{Bundle, MarketState};

const SLACK: f64 = 1e-12;
const STATE_RANGE: f64 = 20.0;
const BUNDLE_RANGE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub axiom: &'static str,
    pub family: CostFamily,
    pub dim: usize,
    pub samples: usize,
    pub failures: usize,
    /// Most negative margin seen; zero or more means the axiom held.
    pub worst_margin: f64,
}

impl AxiomCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub seed: u64,
    pub checks: Vec<AxiomCheck>,
    pub elapsed_seconds: f64,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(AxiomCheck::passed)
    }
}

struct Tally {
    axiom: &'static str,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(axiom: &'static str) -> Self {
        Tally { axiom, failures: 0, worst: f64::INFINITY }
    }

    /// Records `margin >= 0` up to `SLACK`.
    fn record(&mut self, margin: f64) {
        self.worst = self.worst.min(margin);
        if !(margin >= -SLACK) {
            self.failures += 1;
        }
    }
}

fn on_simplex(p: &[f64]) -> f64 {
    let sum: f64 = p.iter().sum();
    let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    // Reported as a margin so it shares the tally logic.
    (SIMPLEX_TOL - (sum - 1.0).abs()).min(min)
}

/// Samples `samples` pairs `(q, r)` for each of softmax and sparsemax
/// (`L = 1`) in 2, 3 and 5 outcomes, with `||q||_inf <= 20` and
/// `||r||_inf <= 10`, and checks the Smooth Quadratic rule (l2 fee) for
/// no arbitrage, information incorporation, a nonnegative fee, simplex
/// prices, dominance over the cost-difference rule, and that every
/// interior belief is reachable as a price.
pub fn run_axiom_suite(samples: usize, seed: u64) -> AxiomReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for family in [CostFamily::Softmax, CostFamily::Sparsemax] {
        for dim in [2, 3, 5] {
            let cost = CostFunction::new(family, 1.0, dim).expect("valid cost");
            let mut tallies = [
                Tally::new("no_arbitrage"),
                Tally::new("information_incorporation"),
                Tally::new("fee_nonnegative"),
                Tally::new("price_on_simplex"),
                Tally::new("revenue_dominance"),
                Tally::new("expressiveness"),
            ];
            for _ in 0..samples {
                let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-STATE_RANGE..=STATE_RANGE)).collect();
                let r: Vec<f64> = (0..dim).map(|_| rng.random_range(-BUNDLE_RANGE..=BUNDLE_RANGE)).collect();
                let state = MarketState::new(cost, NormKind::L2, q.clone()).expect("valid state");
                let bundle = Bundle(r.clone());
                let quote = state.quote_smoothquad(&bundle).expect("finite quote");
                let min_r = r.iter().cloned().fold(f64::INFINITY, f64::min);
                tallies[0].record(quote.total - min_r);

                let moved: Vec<f64> = q.iter().zip(&r).map(|(a, b)| a + b).collect();
                let after = MarketState::new(cost, NormKind::L2, moved).expect("valid state");
                let again = after.quote_smoothquad(&bundle).expect("finite quote");
                tallies[1].record(again.total - quote.total);
                tallies[2].record(quote.fee_part);
                tallies[3].record(on_simplex(state.inst_price().as_slice()).min(on_simplex(after.inst_price().as_slice())));

                let dcfmm = state.quote_dcfmm(&bundle).expect("finite quote");
                tallies[4].record(quote.total - dcfmm.total);

                let mut belief: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..=1.0)).collect();
                let s: f64 = belief.iter().sum();
                belief.iter_mut().for_each(|x| *x /= s);
                let target = crate::convex::SimplexPoint::new(belief.clone()).expect("normalised");
                let reached = cost.grad(&cost.state_for_price(&target).expect("interior")).expect("finite");
                let err: f64 = reached.as_slice().iter().zip(&belief).map(|(a, b)| (a - b).abs()).sum();
                tallies[5].record(1e-9 - err);
            }
            checks.extend(tallies.into_iter().map(|t| AxiomCheck {
                axiom: t.axiom,
                family,
                dim,
                samples,
                failures: t.failures,
                worst_margin: if samples == 0 { 0.0 } else { t.worst },
            }));
        }
    }
    AxiomReport { seed, checks, elapsed_seconds: start.elapsed().as_secs_f64() }
}
