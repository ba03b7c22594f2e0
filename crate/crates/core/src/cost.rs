//! Cost functions obtained as Fenchel conjugates of regularizers restricted
//! to the probability simplex.
//!
//! | family    | regularizer `R(p)`        | `C(q)`                          | price `grad C(q)`      |
//! |-----------|---------------------------|---------------------------------|------------------------|
//! | softmax   | `(1/L) sum p_i log p_i`   | `(1/L) log sum exp(L q_i)`      | `softmax(L q)`         |
//! | sparsemax | `(L/2) ||p||_2^2`         | `max_p <q,p> - (L/2) ||p||^2`   | `project_simplex(q/L)` |
//!
//! Both are convex, one-invariant (`C(q + a 1) = C(q) + a`) and map onto the
//! simplex. Softmax is `L`-smooth for the l2 and l-infinity norms; sparsemax
//! is `1/L`-smooth for l2.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::convex::{check_dim, check_finite, dot, project_simplex_unchecked, NormKind, SimplexPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFamily {
    Softmax,
    Sparsemax,
}

impl fmt::Display for CostFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostFamily::Softmax => "softmax",
            CostFamily::Sparsemax => "sparsemax",
        })
    }
}

impl std::str::FromStr for CostFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "softmax" => Ok(CostFamily::Softmax),
            "sparsemax" => Ok(CostFamily::Sparsemax),
            other => Err(Error::InvalidInput(format!("unknown cost family `{other}`"))),
        }
    }
}

/// A cost function over `d` outcomes with regularization parameter `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    family: CostFamily,
    l: f64,
    dim: usize,
}

impl CostFunction {
    pub fn new(family: CostFamily, l: f64, dim: usize) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidInput(format!("L must be positive and finite, got {l}")));
        }
        if dim < 2 {
            return Err(Error::InvalidInput(format!("a market needs at least 2 outcomes, got {dim}")));
        }
        Ok(CostFunction { family, l, dim })
    }

    pub fn softmax(l: f64, dim: usize) -> Result<Self> {
        Self::new(CostFamily::Softmax, l, dim)
    }

    pub fn sparsemax(l: f64, dim: usize) -> Result<Self> {
        Self::new(CostFamily::Sparsemax, l, dim)
    }

    pub fn family(&self) -> CostFamily {
        self.family
    }

    /// The regularization parameter `L` of the conjugate pair.
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        check_dim(q, self.dim)?;
        check_finite(q, "market state")
    }

    pub fn cost(&self, q: &[f64]) -> Result<f64> {
        self.check(q)?;
        Ok(self.cost_unchecked(q))
    }

    pub(crate) fn cost_unchecked(&self, q: &[f64]) -> f64 {
        match self.family {
            CostFamily::Softmax => {
                let max = q.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                let sum: f64 = q.iter().map(|&x| (self.l * (x - max)).exp()).sum();
                max + sum.ln() / self.l
            }
            CostFamily::Sparsemax => {
                let p = self.grad_unchecked(q);
                let p = p.as_slice();
                dot(q, p) - 0.5 * self.l * dot(p, p)
            }
        }
    }

    /// Instantaneous price vector `grad C(q)`.
    pub fn grad(&self, q: &[f64]) -> Result<SimplexPoint> {
        self.check(q)?;
        Ok(self.grad_unchecked(q))
    }

    pub(crate) fn grad_unchecked(&self, q: &[f64]) -> SimplexPoint {
        match self.family {
            CostFamily::Softmax => {
                let max = q.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                SimplexPoint::renormalized(q.iter().map(|&x| (self.l * (x - max)).exp()).collect())
            }
            CostFamily::Sparsemax => {
                let scaled: Vec<f64> = q.iter().map(|x| x / self.l).collect();
                project_simplex_unchecked(&scaled)
            }
        }
    }

    /// Registered smoothness constant for `kind`.
    pub fn smoothness(&self, kind: NormKind) -> Result<f64> {
        self.smoothness_with(kind, false)
    }

    /// Like [`smoothness`](Self::smoothness), but with `experimental_l1` an
    /// l1 request returns the family's l2 constant instead of an error.
    pub fn smoothness_with(&self, kind: NormKind, experimental_l1: bool) -> Result<f64> {
        let constant = match (self.family, kind) {
            (CostFamily::Softmax, NormKind::L2 | NormKind::LInf) => Some(self.l),
            (CostFamily::Sparsemax, NormKind::L2) => Some(1.0 / self.l),
            (CostFamily::Softmax, NormKind::L1) if experimental_l1 => Some(self.l),
            (CostFamily::Sparsemax, NormKind::L1) if experimental_l1 => Some(1.0 / self.l),
            _ => None,
        };
        constant.ok_or_else(|| Error::UnsupportedNorm {
            family: self.family.to_string(),
            norm: kind.to_string(),
        })
    }

    pub fn regularizer(&self) -> Regularizer {
        Regularizer {
            kind: match self.family {
                CostFamily::Softmax => RegularizerKind::Entropy,
                CostFamily::Sparsemax => RegularizerKind::SquaredL2,
            },
            l: self.l,
        }
    }

    /// A state whose price is `p`: `log(p)/L` for softmax (requires an
    /// interior `p`), `L p` for sparsemax. Any shift along `1` works as well.
    pub fn state_for_price(&self, p: &SimplexPoint) -> Result<Vec<f64>> {
        check_dim(p.as_slice(), self.dim)?;
        match self.family {
            CostFamily::Softmax => {
                if !p.is_interior() {
                    return Err(Error::Domain(
                        "softmax prices lie in the open simplex; target has a zero entry".into(),
                    ));
                }
                Ok(p.as_slice().iter().map(|x| x.ln() / self.l).collect())
            }
            CostFamily::Sparsemax => Ok(p.as_slice().iter().map(|x| x * self.l).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularizerKind {
    /// `(1/L) sum p_i log p_i` on the open simplex.
    Entropy,
    /// `(L/2) ||p||_2^2` on the closed simplex.
    SquaredL2,
}

/// The simplex-restricted regularizer whose conjugate is a [`CostFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub kind: RegularizerKind,
    pub l: f64,
}

impl Regularizer {
    pub fn value(&self, p: &SimplexPoint) -> Result<f64> {
        let p = p.as_slice();
        match self.kind {
            RegularizerKind::Entropy => {
                if p.iter().any(|&x| x <= 0.0) {
                    return Err(Error::Domain(
                        "entropy regularizer is defined on the open simplex only".into(),
                    ));
                }
                Ok(p.iter().map(|x| x * x.ln()).sum::<f64>() / self.l)
            }
            RegularizerKind::SquaredL2 => Ok(0.5 * self.l * dot(p, p)),
        }
    }

    /// Supremum over simplex vertices (for entropy, the limit `0`).
    pub fn vertex_max(&self) -> f64 {
        match self.kind {
            RegularizerKind::Entropy => 0.0,
            RegularizerKind::SquaredL2 => 0.5 * self.l,
        }
    }

    /// Minimum over the simplex, attained at the uniform distribution.
    pub fn simplex_min(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match self.kind {
            RegularizerKind::Entropy => -d.ln() / self.l,
            RegularizerKind::SquaredL2 => 0.5 * self.l / d,
        }
    }

    /// Worst-case loss bound of a DCFMM started from `q = 0`.
    pub fn loss_bound(&self, dim: usize) -> f64 {
        self.vertex_max() - self.simplex_min(dim)
    }
}
