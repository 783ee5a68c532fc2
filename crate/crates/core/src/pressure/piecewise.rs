//! Tabulated piecewise-polynomial laws.
//!
//! JSON schema:
//!
//! ```json
//! {
//!   "label": "soft-well",
//!   "gamma": 2.0,
//!   "breakpoints": [0.0, 1.0, 2.0],
//!   "coefficients": [[0.0, 0.0, 1.0], [1.0, 2.0, -0.5], [2.5, 1.0, 1.0]]
//! }
//! ```
//!
//! Piece `i` covers `[b_i, b_{i+1})` (the last piece is unbounded) and is
//! the polynomial `Σ_j c_ij (ρ − b_i)^j`. The first breakpoint must be 0,
//! breakpoints must increase strictly, and the table must be continuous
//! with `P(0) = 0`.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
}

/// On-disk form, including the law metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTable {
    pub label: String,
    pub gamma: f64,
    pub breakpoints: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
}

const CONTINUITY_TOL: f64 = 1e-9;

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn horner_derivative(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, &a)| acc * x + j as f64 * a)
}

impl PiecewisePolynomial {
    pub fn new(breakpoints: Vec<f64>, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        let t = Self {
            breakpoints,
            coefficients,
        };
        t.check()?;
        Ok(t)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let b = &self.breakpoints;
        if b.is_empty() || b.len() != self.coefficients.len() {
            return Err(invalid(
                "coefficients",
                "need one coefficient list per breakpoint",
            ));
        }
        if b[0] != 0.0 {
            return Err(invalid("breakpoints", "first breakpoint must be 0"));
        }
        if b.windows(2).any(|w| !(w[1] > w[0])) || b.iter().any(|x| !x.is_finite()) {
            return Err(invalid("breakpoints", "must be finite and strictly increasing"));
        }
        if self.coefficients.iter().any(|c| c.is_empty() || c.iter().any(|x| !x.is_finite())) {
            return Err(invalid("coefficients", "each piece needs finite coefficients"));
        }
        if self.coefficients[0][0] != 0.0 {
            return Err(invalid("coefficients", "P(0) must be 0"));
        }
        for i in 1..b.len() {
            let left = horner(&self.coefficients[i - 1], b[i] - b[i - 1]);
            let right = self.coefficients[i][0];
            if (left - right).abs() > CONTINUITY_TOL * (1.0 + left.abs()) {
                return Err(invalid(
                    "coefficients",
                    format!("discontinuous at breakpoint {}: {left} vs {right}", b[i]),
                ));
            }
        }
        Ok(())
    }

    fn piece(&self, rho: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= rho).saturating_sub(1)
    }

    pub fn value(&self, rho: f64) -> f64 {
        let i = self.piece(rho);
        horner(&self.coefficients[i], rho - self.breakpoints[i])
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        let i = self.piece(rho);
        horner_derivative(&self.coefficients[i], rho - self.breakpoints[i])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

impl PiecewiseTable {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("piecewise law: {e}")))
    }

    pub fn into_law(self) -> Result<super::PressureLaw> {
        let table = PiecewisePolynomial::new(self.breakpoints, self.coefficients)?;
        super::PressureLaw::piecewise(self.gamma, &self.label, table)
    }
}
