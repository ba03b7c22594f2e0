//! Norms, simplex geometry, Bregman divergences and the numeric oracles
//! (adaptive quadrature, central differences) shared by the market code.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::error::{Error, Result};

/// Tolerance on `sum(p) = 1` for simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Maximum number of subintervals the adaptive quadrature may create.
pub const QUADRATURE_INTERVAL_CAP: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    LInf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::LInf];

    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::LInf,
            NormKind::L2 => NormKind::L2,
            NormKind::LInf => NormKind::L1,
        }
    }

    /// Unchecked norm; callers validate finiteness at the API boundary.
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => {
                // Scaled so tiny and huge entries neither underflow nor overflow.
                let m = NormKind::LInf.eval(v);
                if m == 0.0 || !m.is_finite() {
                    return m;
                }
                m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
            }
            NormKind::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn eval_dual(self, v: &[f64]) -> f64 {
        self.dual().eval(v)
    }

    /// Distance from `v` to the line `{alpha * 1}` under this norm.
    ///
    /// Cost functions here are invariant along the all-ones direction, so
    /// this is the distance between two minimiser sets of `C(q) - <mu, q>`.
    pub fn distance_to_ones_line(self, v: &[f64]) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let shift = match self {
            NormKind::L2 => v.iter().sum::<f64>() / v.len() as f64,
            NormKind::LInf => {
                let (lo, hi) = min_max(v);
                0.5 * (lo + hi)
            }
            NormKind::L1 => {
                let mut sorted = v.to_vec();
                sorted.sort_by(f64::total_cmp);
                sorted[sorted.len() / 2]
            }
        };
        let shifted: Vec<f64> = v.iter().map(|x| x - shift).collect();
        self.eval(&shifted)
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::LInf => "linf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "linf" | "l_inf" | "inf" => Ok(NormKind::LInf),
            other => Err(Error::InvalidInput(format!("unknown norm `{other}`"))),
        }
    }
}

/// A probability vector over `d` outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(format!(
                "probability vector has a negative or non-finite entry: {p:?}"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "belief not on simplex: entries sum to {total}"
            )));
        }
        Ok(SimplexPoint(p))
    }

    pub fn uniform(d: usize) -> Self {
        SimplexPoint(vec![1.0 / d as f64; d])
    }

    pub fn vertex(d: usize, i: usize) -> Self {
        let mut p = vec![0.0; d];
        p[i] = 1.0;
        SimplexPoint(p)
    }

    /// Clamps tiny negatives and rescales once; used on outputs of exact
    /// simplex maps to remove rounding drift.
    pub(crate) fn renormalized(mut p: Vec<f64>) -> Self {
        for x in p.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        for x in p.iter_mut() {
            *x /= total;
        }
        SimplexPoint(p)
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&x| x > 0.0)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has a non-finite entry")))
    }
}

pub(crate) fn check_dim(v: &[f64], expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got: v.len() })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

pub fn norm(v: &[f64], kind: NormKind) -> Result<f64> {
    check_finite(v, "vector")?;
    Ok(kind.eval(v))
}

/// `sup_{||x|| <= 1} <x, v>`, which for the supported norms is the norm of
/// `v` under the dual kind.
pub fn dual_norm(v: &[f64], kind: NormKind) -> Result<f64> {
    check_finite(v, "vector")?;
    Ok(kind.eval_dual(v))
}

/// `C(x) - C(y) - <grad C(y), x - y>`.
pub fn bregman(cost: &CostFunction, x: &[f64], y: &[f64]) -> Result<f64> {
    let cx = cost.cost(x)?;
    let cy = cost.cost(y)?;
    let gy = cost.grad(y)?;
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(cx - cy - dot(gy.as_slice(), &diff))
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(z: &[f64]) -> Result<SimplexPoint> {
    if z.is_empty() {
        return Err(Error::InvalidInput("cannot project an empty vector".into()));
    }
    check_finite(z, "projection input")?;
    Ok(project_simplex_unchecked(z))
}

pub(crate) fn project_simplex_unchecked(z: &[f64]) -> SimplexPoint {
    // Descending by value, ties by index; ties do not change the threshold.
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| match z[b].partial_cmp(&z[a]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    });
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cumulative += z[i];
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if z[i] - candidate > 0.0 {
            threshold = candidate;
        }
    }
    SimplexPoint::renormalized(z.iter().map(|x| (x - threshold).max(0.0)).collect())
}

/// Price of moving from `q` to `q + r` as the line integral of the price
/// field, `int_0^1 <grad C(q + s r), r> ds`, by adaptive Gauss-Lobatto-Kronrod
/// quadrature. By the gradient theorem this equals `C(q + r) - C(q)`.
pub fn line_integral_price(cost: &CostFunction, q: &[f64], r: &[f64], tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("quadrature tolerance must be positive, got {tol}")));
    }
    check_dim(q, cost.dim())?;
    check_dim(r, cost.dim())?;
    check_finite(q, "state")?;
    check_finite(r, "bundle")?;
    if r.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let mut point = vec![0.0; q.len()];
    let mut integrand = |s: f64| {
        for ((p, qi), ri) in point.iter_mut().zip(q).zip(r) {
            *p = qi + s * ri;
        }
        dot(cost.grad_unchecked(&point).as_slice(), r)
    };
    adaptive_gauss_kronrod(&mut integrand, 0.0, 1.0, tol)
}

// 7-point Kronrod extension of the 4-point Gauss-Lobatto rule. Both use the
// interval endpoints, so a kink anywhere inside an interval moves an endpoint
// value and shows up in the error estimate; open Gauss nodes can miss a kink
// sitting between the last node and the endpoint.
const LK_OUTER: f64 = 0.816_496_580_927_726; // sqrt(2/3)
const LK_INNER: f64 = 0.447_213_595_499_958; // 1/sqrt(5)
const K_END: f64 = 11.0 / 210.0;
const K_OUTER: f64 = 72.0 / 245.0;
const K_INNER: f64 = 125.0 / 294.0;
const K_CENTER: f64 = 16.0 / 35.0;
const L_END: f64 = 1.0 / 6.0;
const L_INNER: f64 = 5.0 / 6.0;

fn lobatto_kronrod_7(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let ends = f(a) + f(b);
    let outer = f(center - half * LK_OUTER) + f(center + half * LK_OUTER);
    let inner = f(center - half * LK_INNER) + f(center + half * LK_INNER);
    let kronrod = K_END * ends + K_OUTER * outer + K_INNER * inner + K_CENTER * f(center);
    let lobatto = L_END * ends + L_INNER * inner;
    (kronrod * half, ((kronrod - lobatto) * half).abs())
}

/// Globally adaptive bisection: always split the interval with the largest
/// error estimate until the summed estimate drops to `tol`.
pub(crate) fn adaptive_gauss_kronrod(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    let (value, error) = lobatto_kronrod_7(f, a, b);
    let mut intervals = vec![(a, b, value, error)];
    loop {
        let total_error: f64 = intervals.iter().map(|iv| iv.3).sum();
        if total_error <= tol {
            return Ok(intervals.iter().map(|iv| iv.2).sum());
        }
        if intervals.len() >= QUADRATURE_INTERVAL_CAP {
            return Err(Error::Quadrature { intervals: intervals.len(), estimate: total_error });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("at least one interval");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval no longer splittable in floating point.
            return Err(Error::Quadrature { intervals: intervals.len() + 1, estimate: total_error });
        }
        let (lv, le) = lobatto_kronrod_7(f, lo, mid);
        let (rv, re) = lobatto_kronrod_7(f, mid, hi);
        intervals.push((lo, mid, lv, le));
        intervals.push((mid, hi, rv, re));
    }
}

/// Default central-difference step for a point `x`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    1e-6 * (1.0 + NormKind::LInf.eval(x))
}

/// Central-difference gradient estimate of `f` at `x` with step `h`.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let forward = f(&probe);
        probe[i] = x[i] - h;
        let backward = f(&probe);
        probe[i] = x[i];
        grad.push((forward - backward) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn norms_on_canonical_vector() {
        let v = [3.0, -4.0, 0.0];
        assert_eq!(norm(&v, NormKind::L2).unwrap(), 5.0);
        assert_eq!(norm(&v, NormKind::L1).unwrap(), 7.0);
        assert_eq!(norm(&v, NormKind::LInf).unwrap(), 4.0);
        assert_eq!(dual_norm(&v, NormKind::L2).unwrap(), 5.0);
        assert_eq!(dual_norm(&v, NormKind::LInf).unwrap(), 7.0);
        assert_eq!(dual_norm(&[1.0, 1.0, 1.0], NormKind::L1).unwrap(), 1.0);
    }

    #[test]
    fn norm_rejects_non_finite() {
        assert!(matches!(norm(&[1.0, f64::NAN], NormKind::L2), Err(Error::InvalidInput(_))));
        assert!(dual_norm(&[f64::INFINITY], NormKind::L1).is_err());
    }

    #[test]
    fn duals_pair_up() {
        for kind in NormKind::ALL {
            assert_eq!(kind.dual().dual(), kind);
        }
        assert_eq!(NormKind::L1.dual(), NormKind::LInf);
    }

    #[test]
    fn zero_norm_iff_zero() {
        for kind in NormKind::ALL {
            assert_eq!(kind.eval(&[0.0, 0.0]), 0.0);
            assert!(kind.eval(&[0.0, 1e-300]) > 0.0);
        }
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        let err = SimplexPoint::new(vec![0.3, 0.3, 0.3]).unwrap_err();
        assert!(err.to_string().contains("belief not on simplex"));
        assert!(SimplexPoint::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
    }

    #[test]
    fn projection_examples() {
        let third = 1.0 / 3.0;
        let p = project_simplex(&[third, third, third]).unwrap();
        assert!(close(p.as_slice(), &[third, third, third], 1e-15));
        // Grid brute force over the simplex at resolution 1/400 gives (1, 0, 0).
        let p = project_simplex(&[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]).unwrap();
        assert!(close(p.as_slice(), &[third, third, third], 1e-15));
    }

    #[test]
    fn projection_with_ties_is_order_independent() {
        let a = project_simplex(&[0.7, 0.7, 0.1]).unwrap();
        let b = project_simplex(&[0.1, 0.7, 0.7]).unwrap();
        assert!(close(a.as_slice(), &[0.5, 0.5, 0.0], 1e-15));
        assert!(close(b.as_slice(), &[0.0, 0.5, 0.5], 1e-15));
    }

    #[test]
    fn projection_matches_grid_brute_force() {
        let z = [0.9, 0.4, -0.2];
        let n = 500;
        let mut best = (f64::INFINITY, [0.0; 3]);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let p = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                let dist: f64 = z.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best.0 {
                    best = (dist, p);
                }
            }
        }
        let p = project_simplex(&z).unwrap();
        assert!(close(p.as_slice(), &best.1, 2.0 / n as f64));
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        let mut f = |s: f64| 3.0 * s * s + 1.0;
        let v = adaptive_gauss_kronrod(&mut f, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        let mut kink = |s: f64| (s - 0.3).abs();
        let v = adaptive_gauss_kronrod(&mut kink, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-10);
    }

    #[test]
    fn quadrature_sees_kink_next_to_interval_end() {
        // The support change sits just inside a dyadic split point, closer to
        // it than any open Gauss node.
        let cost = CostFunction::sparsemax(1.0, 3).unwrap();
        let q = [-7.186395166008874, 4.012590792417612, -7.741192676805024];
        let r = [-4.474874102497304, -9.529611304151526, 7.689202374849991];
        let moved: Vec<f64> = q.iter().zip(&r).map(|(a, b)| a + b).collect();
        let exact = cost.cost(&moved).unwrap() - cost.cost(&q).unwrap();
        let v = line_integral_price(&cost, &q, &r, 1e-11).unwrap();
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        let mut wild = |s: f64| 1.0 / (s - 1.0 / 3.0).powi(2);
        let err = adaptive_gauss_kronrod(&mut wild, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn finite_difference_of_linear_field() {
        let c = [1.5, -2.0, 0.25];
        let g = finite_diff_grad(|x| dot(&c, x), &[0.3, 1.0, -4.0], 1e-6).unwrap();
        assert!(close(&g, &c, 1e-8));
        assert!(finite_diff_grad(|x| x[0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn ones_line_distance() {
        let v = [1.0, 2.0, 6.0];
        assert!((NormKind::LInf.distance_to_ones_line(&v) - 2.5).abs() < 1e-15);
        assert!((NormKind::L1.distance_to_ones_line(&v) - 5.0).abs() < 1e-15);
        let mean = 3.0;
        let l2: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>().sqrt();
        assert!((NormKind::L2.distance_to_ones_line(&v) - l2).abs() < 1e-15);
        assert_eq!(NormKind::L2.distance_to_ones_line(&[4.0, 4.0]), 0.0);
    }
}
