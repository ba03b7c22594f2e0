//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the log.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smoothquad::convex::line_integral_price;
use smoothquad::sim::{compare_revenue, load_config, parse_config, random_history, run_axiom_suite, run_scenario};
use smoothquad::traders::{budgeted_step_l2, buy_only_kkt, buy_only_step, ConvergenceTrace};
use smoothquad::{
    Bundle, CostFamily, CostFunction, Ledger, LiquidityParams, Market, MarketState, NormKind, PaymentRule,
    SolverParams, VolumeState, VpmMarket,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"))
}

fn run_bundled(name: &str) -> smoothquad::sim::ScenarioRun {
    let cfg = load_config(&scenario(name)).expect("bundled config parses");
    run_scenario(&cfg).expect("bundled scenario sets up")
}

/// First round at which the l1 gap drops below `tol`.
fn first_below(trace: &ConvergenceTrace, tol: f64) -> Option<u64> {
    trace.rows.iter().find(|r| r.l1_gap < tol).map(|r| r.t)
}

fn uniform(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..=hi)).collect()
}

fn criterion_1() -> Outcome {
    let report = run_axiom_suite(10_000, 1);
    let wanted = ["no_arbitrage", "information_incorporation", "fee_nonnegative", "price_on_simplex"];
    let failures: Vec<String> = report
        .checks
        .iter()
        .filter(|c| wanted.contains(&c.axiom) && !c.passed())
        .map(|c| format!("{} {} d={}", c.axiom, c.family, c.dim))
        .collect();
    let fast = report.elapsed_seconds < 5.0;
    outcome(
        failures.is_empty() && fast,
        format!(
            "{} checks x 10^4 pairs, failures {:?}, {:.2}s",
            report.checks.iter().filter(|c| wanted.contains(&c.axiom)).count(),
            failures,
            report.elapsed_seconds
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut violations = 0;
    let mut min_cumulative_margin = f64::INFINITY;
    for family in ["softmax", "sparsemax"] {
        for d in [2usize, 3, 5] {
            let q0 = vec!["0"; d].join(", ");
            let belief = vec![format!("1/{d}"); d].join(", ");
            let cfg = parse_config(&format!(
                "cost = {family}\nL = 1\nnorm = l2\nq0 = {q0}\nbelief = {belief}\nrounds = 1\n"
            ))
            .expect("config");
            // Pointwise: independent random states as in the axiom suite.
            let mut rng = ChaCha8Rng::seed_from_u64(2 + d as u64);
            let cost = cfg.cost().expect("cost");
            for _ in 0..10_000 {
                let state = MarketState::new(cost, NormKind::L2, uniform(&mut rng, d, -20.0, 20.0)).expect("state");
                let r = Bundle(uniform(&mut rng, d, -10.0, 10.0));
                let sq = state.quote_smoothquad(&r).expect("quote").total;
                let dc = state.quote_dcfmm(&r).expect("quote").total;
                if sq < dc - 1e-12 {
                    violations += 1;
                }
            }
            // Cumulative: one sequential history.
            let report = compare_revenue(&cfg, &cfg.q0, &random_history(d, 10_000, 7)).expect("compare");
            violations += report.dominance_violations.len();
            for row in &report.rows {
                min_cumulative_margin = min_cumulative_margin.min(row.cumulative_smooth_quad - row.cumulative_dcfmm);
            }
        }
    }
    outcome(
        violations == 0 && min_cumulative_margin >= -1e-12,
        format!("{violations} pointwise violations, min cumulative margin {min_cumulative_margin:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let run = run_bundled("descent_l2");
    let elapsed = start.elapsed().as_secs_f64();
    let trace = &run.trace;
    let hit = first_below(trace, 1e-3);
    let worst = trace
        .rows
        .iter()
        .filter(|r| r.t >= 1)
        .map(|r| r.suboptimality - trace.gd_envelope(r.t))
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        run.failure.is_none() && hit.is_some_and(|t| t <= 500) && worst <= 1e-9 && elapsed < 1.0,
        format!("gap < 1e-3 at t = {hit:?}, max(subopt - envelope) = {worst:.3e}, {elapsed:.3}s"),
    )
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["descent_linf", "descent_l1"] {
        let run = run_bundled(name);
        let trace = &run.trace;
        let hit = first_below(trace, 1e-3);
        let worst = trace
            .rows
            .iter()
            .filter(|r| r.t >= 1)
            .map(|r| r.suboptimality - trace.sd_envelope(r.t))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut multi = 0;
        if name == "descent_l1" {
            multi = run.ledger.records.iter().filter(|r| r.bundle.0.iter().filter(|x| **x != 0.0).count() > 1).count();
        }
        ok &= run.failure.is_none() && hit.is_some() && worst <= 1e-9 && multi == 0;
        parts.push(format!(
            "{name}: gap < 1e-3 at t = {hit:?}, max(subopt - envelope) = {worst:.3e}, K = {:.4}, multi-coordinate bundles {multi}",
            trace.empirical_radius()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for name in ["descent_l2", "descent_linf", "descent_l1"] {
        let trace = run_bundled(name).trace;
        let l = trace.smoothness;
        for pair in trace.rows.windows(2) {
            let g: Vec<f64> = pair[0].price.iter().zip(&trace.belief).map(|(p, m)| p - m).collect();
            let dual = trace.norm.eval_dual(&g);
            let excess = pair[1].suboptimality - (pair[0].suboptimality - dual * dual / (2.0 * l));
            worst = worst.max(excess);
        }
    }
    outcome(worst <= 1e-10, format!("max excess over guaranteed decrease {worst:.3e}"))
}

fn grid_max(f: impl Fn(f64, f64) -> Option<f64>, lo: [f64; 2], hi: [f64; 2], h: f64) -> (f64, [f64; 2]) {
    let n0 = ((hi[0] - lo[0]) / h).round() as usize;
    let n1 = ((hi[1] - lo[1]) / h).round() as usize;
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for i in 0..=n0 {
        let x = lo[0] + i as f64 * h;
        for j in 0..=n1 {
            let y = lo[1] + j as f64 * h;
            if let Some(v) = f(x, y) {
                if v > best.0 {
                    best = (v, [x, y]);
                }
            }
        }
    }
    best
}

fn criterion_6() -> Outcome {
    let run = run_bundled("buy_only_l2");
    let belief = &run.trace.belief;
    let l = run.trace.smoothness;
    let negative = run.ledger.records.iter().filter(|r| r.bundle.0.iter().any(|x| *x < 0.0)).count();
    let kkt = run
        .ledger
        .records
        .iter()
        .map(|r| {
            let c: Vec<f64> = r.pre_price.as_slice().iter().zip(belief).map(|(p, m)| p - m).collect();
            buy_only_kkt(&c, r.bundle.as_slice(), l).max()
        })
        .fold(0.0, f64::max);
    let hit = first_below(&run.trace, 1e-3);

    // d = 2 oracle: maximise <mu - p, r> - (L/2)||r||^2 over a 1e-3 grid on [0, 1]^2.
    let cost = CostFunction::softmax(1.0, 2).expect("cost");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_value = 0.0f64;
    let mut worst_bundle = 0.0f64;
    for _ in 0..100 {
        let q = uniform(&mut rng, 2, -3.0, 3.0);
        let u = rng.random_range(0.01..0.99);
        let mu = [u, 1.0 - u];
        let p = cost.grad(&q).expect("price");
        let c: Vec<f64> = p.as_slice().iter().zip(&mu).map(|(a, b)| a - b).collect();
        let objective = |x: f64, y: f64| -(c[0] * x + c[1] * y) - 0.5 * (x * x + y * y);
        let closed = buy_only_step(&c, 1.0, NormKind::L2);
        let (grid_value, grid_r) = grid_max(|x, y| Some(objective(x, y)), [0.0, 0.0], [1.0, 1.0], 1e-3);
        let value = objective(closed.0[0], closed.0[1]);
        worst_value = worst_value.max((grid_value - value).abs());
        worst_bundle = worst_bundle.max(NormKind::LInf.eval(&[grid_r[0] - closed.0[0], grid_r[1] - closed.0[1]]));
    }
    outcome(
        negative == 0 && kkt <= 1e-10 && hit.is_some_and(|t| t <= 1000) && worst_value <= 1e-4 && worst_bundle <= 5e-4 + 1e-12,
        format!(
            "negative bundles {negative}, max KKT residual {kkt:.3e}, gap < 1e-3 at t = {hit:?}, oracle value gap {worst_value:.3e}, bundle gap {worst_bundle:.3e} (grid 1e-3)"
        ),
    )
}

/// Maximises `f` over the feasible part of a box by repeatedly refining a
/// grid around the incumbent.
fn nested_grid_max(f: &dyn Fn(f64, f64) -> Option<f64>, lo: [f64; 2], hi: [f64; 2]) -> (f64, [f64; 2]) {
    let mut h = (hi[0] - lo[0]).max(hi[1] - lo[1]) / 400.0;
    let mut best = grid_max(f, lo, hi, h);
    while h > 1e-9 {
        let window = 3.0 * h;
        h /= 20.0;
        let centre = best.1;
        let candidate = grid_max(
            f,
            [centre[0] - window, centre[1] - window],
            [centre[0] + window, centre[1] + window],
            h,
        );
        if candidate.0 >= best.0 {
            best = candidate;
        }
    }
    best
}

fn criterion_7() -> Outcome {
    let run = run_bundled("budget_l2");
    let budget = 0.01;
    let l = run.trace.smoothness;
    let worst_loss = run
        .ledger
        .records
        .iter()
        .map(|r| {
            let p = r.pre_price.as_slice();
            let b = r.bundle.as_slice();
            let pay: f64 = p.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() + 0.5 * l * b.iter().map(|x| x * x).sum::<f64>();
            b.iter().map(|ry| pay - ry).fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let hit = first_below(&run.trace, 1e-2);

    let cost = CostFunction::softmax(1.0, 2).expect("cost");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_value = 0.0f64;
    let mut worst_bundle = 0.0f64;
    let mut solver_errors = 0;
    for _ in 0..50 {
        let q = uniform(&mut rng, 2, -3.0, 3.0);
        let u = rng.random_range(0.02..0.98);
        let mu = [u, 1.0 - u];
        let p = cost.grad(&q).expect("price").into_inner();
        let c: Vec<f64> = p.iter().zip(&mu).map(|(a, b)| a - b).collect();
        let feasible = |x: f64, y: f64| {
            let pay = p[0] * x + p[1] * y + 0.5 * (x * x + y * y);
            pay - x <= budget && pay - y <= budget
        };
        let objective = |x: f64, y: f64| -(c[0] * x + c[1] * y) - 0.5 * (x * x + y * y);
        let f = |x: f64, y: f64| feasible(x, y).then(|| objective(x, y));
        // Each constraint is a disc centred at e_y - p.
        let radius = |y: usize| {
            let centre = [-(p[0] - if y == 0 { 1.0 } else { 0.0 }), -(p[1] - if y == 1 { 1.0 } else { 0.0 })];
            (centre, (centre[0] * centre[0] + centre[1] * centre[1] + 2.0 * budget).sqrt())
        };
        let (c0, r0) = radius(0);
        let (c1, r1) = radius(1);
        let lo = [(c0[0] - r0).max(c1[0] - r1), (c0[1] - r0).max(c1[1] - r1)];
        let hi = [(c0[0] + r0).min(c1[0] + r1), (c0[1] + r0).min(c1[1] + r1)];
        let (grid_value, grid_r) = nested_grid_max(&f, lo, hi);
        match budgeted_step_l2(&c, &p, 1.0, budget, &SolverParams::default()) {
            Ok(sol) => {
                let r = sol.bundle.as_slice();
                let value = objective(r[0], r[1]);
                worst_value = worst_value.max((grid_value - value).abs());
                worst_bundle = worst_bundle.max(NormKind::LInf.eval(&[grid_r[0] - r[0], grid_r[1] - r[1]]));
            }
            Err(_) => solver_errors += 1,
        }
    }
    outcome(
        run.failure.is_none()
            && worst_loss <= budget + 1e-8
            && hit.is_some_and(|t| t <= 10_000)
            && solver_errors == 0
            && worst_value <= 1e-4
            && worst_bundle <= 1e-4,
        format!(
            "max per-trade loss {worst_loss:.12}, gap < 1e-2 at t = {hit:?}, oracle value gap {worst_value:.3e}, bundle gap {worst_bundle:.3e}, solver errors {solver_errors}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let cost = CostFunction::softmax(1.0, 3).expect("cost");
    let bound = 3f64.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_dcfmm = f64::NEG_INFINITY;
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let state = MarketState::new(cost, NormKind::L2, vec![0.0; 3]).expect("state");
        let mut dcfmm = Market::new(state.clone());
        let mut smooth = Market::new(state);
        let len = rng.random_range(1..=30);
        let strategy = rng.random_range(0..4);
        let target = rng.random_range(0..3);
        for _ in 0..len {
            let r = match strategy {
                0 => uniform(&mut rng, 3, -1.0, 1.0),
                1 => {
                    let mut r = vec![0.0; 3];
                    r[target] = rng.random_range(0.0..10.0);
                    r
                }
                2 => uniform(&mut rng, 3, -20.0, 20.0),
                _ => {
                    let mut r = uniform(&mut rng, 3, -5.0, 0.0);
                    r[target] = rng.random_range(0.0..20.0);
                    r
                }
            };
            dcfmm.apply_trade("adversary", Bundle(r.clone()), PaymentRule::Dcfmm).expect("trade");
            smooth.apply_trade("adversary", Bundle(r), PaymentRule::SmoothQuad).expect("trade");
        }
        let a = dcfmm.ledger.worst_case_loss();
        let b = smooth.ledger.worst_case_loss();
        worst_dcfmm = worst_dcfmm.max(a);
        worst_gap = worst_gap.max(b - a);
    }
    outcome(
        worst_dcfmm <= bound + 1e-9 && worst_gap <= 1e-12,
        format!(
            "worst DCFMM loss {worst_dcfmm:.12} (bound {bound:.12}), max(SmoothQuad loss - DCFMM loss) {worst_gap:.3e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut errors = 0;
    for family in [CostFamily::Softmax, CostFamily::Sparsemax] {
        for i in 0..1000 {
            let d = [2, 3, 5][i % 3];
            let cost = CostFunction::new(family, 1.0, d).expect("cost");
            let q = uniform(&mut rng, d, -10.0, 10.0);
            let r = uniform(&mut rng, d, -10.0, 10.0);
            let moved: Vec<f64> = q.iter().zip(&r).map(|(a, b)| a + b).collect();
            let exact = cost.cost(&moved).expect("cost") - cost.cost(&q).expect("cost");
            match line_integral_price(&cost, &q, &r, 1e-11) {
                Ok(v) => worst = worst.max((v - exact).abs()),
                Err(_) => errors += 1,
            }
        }
    }
    outcome(worst <= 1e-8 && errors == 0, format!("max |quadrature - cost difference| {worst:.3e}, errors {errors}"))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut parts = Vec::new();
    let mut ok = true;

    // No-arbitrage on buy-heavy histories.
    let cost = CostFunction::softmax(1.0, 3).expect("cost");
    let params = LiquidityParams::new(cost, 1.0, 1.0).expect("params");
    let mut worst_arb = f64::NEG_INFINITY;
    let mut worst_fee = f64::INFINITY;
    for _ in 0..1000 {
        let state = MarketState::new(cost, NormKind::L2, uniform(&mut rng, 3, -2.0, 2.0)).expect("state");
        let mut market = VpmMarket::new(params, state, VolumeState::new(0.0).expect("volume")).expect("market");
        for _ in 0..rng.random_range(1..=30) {
            let r = uniform(&mut rng, 3, -0.5, 2.0);
            let v = market.volume.v;
            let dv: f64 = r.iter().map(|x| x.max(0.0)).sum();
            let raw = params.cost(&market.state.q, v + dv).expect("cost") - params.cost(&market.state.q, v).expect("cost");
            worst_fee = worst_fee.min(raw);
            market.apply_trade("buyer", Bundle(r)).expect("trade");
        }
        let net = market.ledger.net_bundle();
        let min_net = net.iter().cloned().fold(f64::INFINITY, f64::min);
        worst_arb = worst_arb.max(min_net - market.ledger.revenue);
    }
    ok &= worst_arb <= 1e-9;
    parts.push(format!("max(min_y payout - revenue) {worst_arb:.3e}"));

    // Fee sign and payment ordering on random inputs, both families.
    let mut worst_order = f64::NEG_INFINITY;
    for family in [CostFamily::Softmax, CostFamily::Sparsemax] {
        let base = CostFunction::new(family, 1.0, 3).expect("cost");
        let params = LiquidityParams::new(base, 1.0, 1.0).expect("params");
        for _ in 0..10_000 {
            let q = uniform(&mut rng, 3, -10.0, 10.0);
            let r = uniform(&mut rng, 3, -10.0, 10.0);
            let v = rng.random_range(0.0..20.0);
            let dv: f64 = r.iter().map(|x| x.max(0.0)).sum();
            worst_fee = worst_fee.min(params.cost(&q, v + dv).expect("cost") - params.cost(&q, v).expect("cost"));
            let pay_l = params.quote_smoothquad(&q, v, &r, NormKind::L2, false).expect("quote").total;
            let pay_d = params.quote_dcfmm(&q, v, &r).expect("quote");
            worst_order = worst_order.max(pay_d - pay_l);
        }
    }
    ok &= worst_fee >= -1e-12 && worst_order <= 1e-12;
    parts.push(format!("min raw liquidity fee {worst_fee:.3e}, max(Pay_D - Pay_L) {worst_order:.3e}"));

    // kappa = 0 reproduces the flat market.
    let mut worst_flat = 0.0f64;
    for family in [CostFamily::Softmax, CostFamily::Sparsemax] {
        let base = CostFunction::new(family, 1.0, 3).expect("cost");
        let params = LiquidityParams::new(base, 1.0, 0.0).expect("params");
        for _ in 0..10_000 {
            let q = uniform(&mut rng, 3, -10.0, 10.0);
            let r = uniform(&mut rng, 3, -10.0, 10.0);
            let v = rng.random_range(0.0..20.0);
            let flat = MarketState::new(base, NormKind::L2, q.clone()).expect("state");
            let a = flat.quote_smoothquad(&Bundle(r.clone())).expect("quote").total;
            let b = params.quote_smoothquad(&q, v, &r, NormKind::L2, false).expect("quote").total;
            worst_flat = worst_flat.max((a - b).abs());
        }
    }
    let flat_run = run_bundled("descent_l2");
    let mut cfg = load_config(&scenario("vpm_l2")).expect("config");
    cfg.liquidity.as_mut().expect("liquidity on").kappa = 0.0;
    cfg.rounds = flat_run.config.rounds;
    let vpm_run = run_scenario(&cfg).expect("run");
    for (a, b) in flat_run.trace.rows.iter().zip(&vpm_run.trace.rows) {
        for (x, y) in a.price.iter().zip(&b.price) {
            worst_flat = worst_flat.max((x - y).abs());
        }
    }
    ok &= worst_flat <= 1e-12;
    parts.push(format!("kappa = 0 max deviation {worst_flat:.3e}"));
    outcome(ok, parts.join(", "))
}

fn criterion_11() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("scenario dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "cfg"))
        .collect();
    names.sort();
    let out = tempfile::tempdir().expect("tempdir");
    let mut mismatches = Vec::new();
    let mut slow = Vec::new();
    for cfg in &names {
        let mut produced = Vec::new();
        for attempt in 0..2 {
            let target = out.path().join(format!("run{attempt}"));
            let start = Instant::now();
            let status = Command::new(env!("CARGO_BIN_EXE_smoothquad"))
                .arg("simulate")
                .arg(cfg)
                .arg("--out")
                .arg(&target)
                .output()
                .expect("spawn cli");
            if start.elapsed().as_secs_f64() > 10.0 {
                slow.push(cfg.display().to_string());
            }
            assert!(status.status.success(), "{}: {}", cfg.display(), String::from_utf8_lossy(&status.stderr));
            let stem = cfg.file_stem().expect("stem").to_string_lossy().to_string();
            let mut files: Vec<PathBuf> = std::fs::read_dir(&target)
                .expect("out dir")
                .map(|e| e.expect("entry").path())
                .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with(&format!("{stem}."))))
                .collect();
            files.sort();
            produced.push(files.iter().map(|f| std::fs::read(f).expect("read")).collect::<Vec<_>>());
        }
        if produced[0] != produced[1] || produced[0].is_empty() {
            mismatches.push(cfg.display().to_string());
        }
    }
    let ledger_ok = names.iter().all(|cfg| {
        let stem = cfg.file_stem().expect("stem").to_string_lossy().to_string();
        let text = std::fs::read_to_string(out.path().join("run0").join(format!("{stem}.ledger.jsonl"))).expect("ledger");
        Ledger::from_jsonl(&text).is_ok()
    });
    outcome(
        mismatches.is_empty() && slow.is_empty() && ledger_ok,
        format!("{} scenarios rerun, mismatches {mismatches:?}, over 10 s {slow:?}", names.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("axiom suite", criterion_1),
        ("revenue dominance", criterion_2),
        ("l2 incremental incentive compatibility", criterion_3),
        ("linf and l1 incremental incentive compatibility", criterion_4),
        ("per-step decrease", criterion_5),
        ("buy-only trading", criterion_6),
        ("budget-bounded trading", criterion_7),
        ("worst-case loss bound", criterion_8),
        ("line-integral identity", criterion_9),
        ("volume-parameterized market", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        if !result.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {}: {}",
            i + 1,
            if result.passed { "PASS" } else { "FAIL" },
            name,
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
