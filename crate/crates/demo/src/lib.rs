//! Browser bindings for three market experiments. Every export returns a flat
//! `Float64Array`; the pure functions below are what the bindings wrap.

use smoothquad::liquidity::LiquidityParams;
use smoothquad::sim::{parse_config, run_scenario, simplex_xy};
use smoothquad::{Bundle, CostFamily, CostFunction, MarketState, NormKind, SimplexPoint};
use wasm_bindgen::prelude::*;

const Q0: [f64; 3] = [10.0, 20.0, 10.0];

fn parse_norm(norm: &str) -> Result<NormKind, String> {
    norm.parse().map_err(|e: smoothquad::Error| e.to_string())
}

fn parse_family(family: &str) -> Result<CostFamily, String> {
    match family {
        "softmax" => Ok(CostFamily::Softmax),
        "sparsemax" => Ok(CostFamily::Sparsemax),
        other => Err(format!("unknown cost family {other}")),
    }
}

/// Price path of a single trader with belief `belief` starting from
/// q = (10, 20, 10), as `x0, y0, x1, y1, ...` in the unit-side triangle.
/// `mode` is `unconstrained`, `buy_only` or `budgeted`; `budget` is read
/// only for the last.
pub fn price_path(norm: &str, mode: &str, budget: f64, belief: [f64; 3], rounds: u64) -> Result<Vec<f64>, String> {
    let norm = parse_norm(norm)?;
    let mut text = format!(
        "name = demo\ncost = softmax\nL = 1\nnorm = {norm}\nq0 = {}, {}, {}\nbelief = {}, {}, {}\nrounds = {rounds}\ntrader = {mode}\n",
        Q0[0], Q0[1], Q0[2], belief[0], belief[1], belief[2]
    );
    if norm == NormKind::L1 {
        text.push_str("experimental_l1 = on\n");
    }
    if mode == "budgeted" {
        text.push_str(&format!("budget = {budget}\n"));
    }
    let config = parse_config(&text).map_err(|e| e.to_string())?;
    let run = run_scenario(&config).map_err(|e| e.to_string())?;
    Ok(run
        .trace
        .rows
        .iter()
        .flat_map(|row| {
            let (x, y) = simplex_xy(&row.price);
            [x, y]
        })
        .collect())
}

/// DCFMM and Smooth Quadratic prices of buying `s` units of `outcome` at
/// q = (10, 20, 10), for `n` sizes evenly spaced in [-max_size, max_size].
/// Rows are `s, dcfmm, smooth_quad`.
pub fn payment_curve(
    family: &str,
    l: f64,
    norm: &str,
    outcome: usize,
    max_size: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    if outcome >= Q0.len() {
        return Err(format!("outcome {outcome} out of range"));
    }
    if n < 2 || !(max_size > 0.0) {
        return Err("need n >= 2 and a positive size".into());
    }
    let cost = CostFunction::new(parse_family(family)?, l, Q0.len()).map_err(|e| e.to_string())?;
    let norm = parse_norm(norm)?;
    let state = MarketState::new(cost, norm, Q0.to_vec()).map_err(|e| e.to_string())?.with_experimental_l1(true);
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let s = -max_size + 2.0 * max_size * i as f64 / (n - 1) as f64;
        let mut r = vec![0.0; Q0.len()];
        r[outcome] = s;
        let bundle = Bundle(r);
        let dc = state.quote_dcfmm(&bundle).map_err(|e| e.to_string())?;
        let sq = state.quote_smoothquad(&bundle).map_err(|e| e.to_string())?;
        out.extend([s, dc.total, sq.total]);
    }
    Ok(out)
}

/// How a one-share purchase of outcome 0 moves its price as traded volume
/// grows, starting from uniform prices. Rows are `v, alpha(v), price
/// before, price after`.
pub fn liquidity_curve(kappa: f64, max_volume: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || !(max_volume > 0.0) {
        return Err("need n >= 2 and a positive volume".into());
    }
    let cost = CostFunction::softmax(1.0, 3).map_err(|e| e.to_string())?;
    let params = LiquidityParams::new(cost, 1.0, kappa).map_err(|e| e.to_string())?;
    let q = [0.0; 3];
    let after = [1.0, 0.0, 0.0];
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        let v = max_volume * i as f64 / (n - 1) as f64;
        let before = params.grad(&q, v).map_err(|e| e.to_string())?;
        // Buying one share adds one unit of volume.
        let moved = params.grad(&after, v + 1.0).map_err(|e| e.to_string())?;
        out.extend([v, params.alpha(v), before.as_slice()[0], moved.as_slice()[0]]);
    }
    Ok(out)
}

fn js_err(message: String) -> JsError {
    JsError::new(&message)
}

fn belief3(values: &[f64]) -> Result<[f64; 3], String> {
    let arr: [f64; 3] = values.try_into().map_err(|_| "belief needs three entries".to_string())?;
    SimplexPoint::new(arr.to_vec()).map_err(|e| e.to_string())?;
    Ok(arr)
}

#[wasm_bindgen(js_name = pricePath)]
pub fn price_path_js(norm: &str, mode: &str, budget: f64, belief: &[f64], rounds: u32) -> Result<Vec<f64>, JsError> {
    let belief = belief3(belief).map_err(js_err)?;
    price_path(norm, mode, budget, belief, rounds as u64).map_err(js_err)
}

#[wasm_bindgen(js_name = paymentCurve)]
pub fn payment_curve_js(
    family: &str,
    l: f64,
    norm: &str,
    outcome: u32,
    max_size: f64,
    n: u32,
) -> Result<Vec<f64>, JsError> {
    payment_curve(family, l, norm, outcome as usize, max_size, n as usize).map_err(js_err)
}

#[wasm_bindgen(js_name = liquidityCurve)]
pub fn liquidity_curve_js(kappa: f64, max_volume: f64, n: u32) -> Result<Vec<f64>, JsError> {
    liquidity_curve(kappa, max_volume, n as usize).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BELIEF: [f64; 3] = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];

    #[test]
    fn path_ends_near_belief() {
        let path = price_path("l2", "unconstrained", 0.0, BELIEF, 300).unwrap();
        assert_eq!(path.len(), 2 * 301);
        let (bx, by) = simplex_xy(&BELIEF);
        let (x, y) = (path[path.len() - 2], path[path.len() - 1]);
        assert!((x - bx).abs() < 1e-3 && (y - by).abs() < 1e-3);
    }

    #[test]
    fn every_mode_and_norm_runs() {
        for norm in ["l1", "l2", "linf"] {
            for mode in ["unconstrained", "buy_only", "budgeted"] {
                let path = price_path(norm, mode, 0.05, BELIEF, 20).unwrap();
                assert_eq!(path.len(), 42, "{norm} {mode}");
            }
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(price_path("l3", "unconstrained", 0.0, BELIEF, 5).is_err());
        assert!(price_path("l2", "unconstrained", 0.0, [0.5, 0.5, 0.5], 5).is_err());
        assert!(payment_curve("softmax", 1.0, "l2", 3, 1.0, 10).is_err());
        assert!(payment_curve("logit", 1.0, "l2", 0, 1.0, 10).is_err());
        assert!(liquidity_curve(1.0, 10.0, 1).is_err());
    }

    #[test]
    fn smooth_quad_never_undercuts_dcfmm() {
        for family in ["softmax", "sparsemax"] {
            let rows = payment_curve(family, 1.0, "l2", 1, 5.0, 41).unwrap();
            for row in rows.chunks(3) {
                assert!(row[2] >= row[1] - 1e-12, "{family} {row:?}");
            }
            // Zero trade costs nothing.
            assert!(rows[60].abs() < 1e-12 && rows[61].abs() < 1e-12 && rows[62].abs() < 1e-12);
        }
    }

    #[test]
    fn deeper_markets_move_less() {
        let rows = liquidity_curve(1.0, 100.0, 11).unwrap();
        let impact: Vec<f64> = rows.chunks(4).map(|r| r[3] - r[2]).collect();
        assert!(impact.iter().all(|d| *d > 0.0));
        assert!(impact.windows(2).all(|w| w[1] < w[0]));
        let flat = liquidity_curve(0.0, 100.0, 3).unwrap();
        assert!(flat.chunks(4).all(|r| r[1] == 1.0));
    }
}
