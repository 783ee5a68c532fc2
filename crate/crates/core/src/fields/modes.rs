//! Finite Fourier sums `c + Σ a_k cos(2πk·x) + b_k sin(2πk·x)` evaluated
//! pointwise, so one function can be sampled on grids of any resolution.

use super::{PeriodicGrid, ScalarField};
use crate::error::{invalid, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: [i64; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSum {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub modes: Vec<Mode>,
}

impl ModeSum {
    pub fn constant(c: f64) -> Self {
        Self {
            offset: c,
            modes: Vec::new(),
        }
    }

    pub fn single(k: [i64; 2], cos: f64, sin: f64) -> Self {
        Self {
            offset: 0.0,
            modes: vec![Mode { k, cos, sin }],
        }
    }

    /// Gaussian coefficients with amplitude `(1 + |k|²)^{-decay/2}` on every
    /// mode with `1 ≤ max|k_i| ≤ kmax` (one representative per ± pair).
    pub fn random<R: Rng + ?Sized>(dim: usize, kmax: i64, decay: f64, rng: &mut R) -> Result<Self> {
        if kmax < 1 {
            return Err(invalid("kmax", "must be at least 1"));
        }
        let mut modes = Vec::new();
        let ky_range = if dim == 2 { -kmax..=kmax } else { 0..=0 };
        for ky in ky_range {
            for kx in -kmax..=kmax {
                // half-plane representative: (kx > 0) or (kx == 0 and ky > 0)
                if !(kx > 0 || (kx == 0 && ky > 0)) {
                    continue;
                }
                let amp = (1.0 + (kx * kx + ky * ky) as f64).powf(-decay / 2.0);
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                modes.push(Mode {
                    k: [kx, ky],
                    cos: amp * a,
                    sin: amp * b,
                });
            }
        }
        Ok(Self { offset: 0.0, modes })
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.offset
            + self
                .modes
                .iter()
                .map(|m| {
                    let th = 2.0 * PI * (m.k[0] as f64 * x[0] + m.k[1] as f64 * x[1]);
                    m.cos * th.cos() + m.sin * th.sin()
                })
                .sum::<f64>()
    }

    /// Exact gradient at `x`.
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for m in &self.modes {
            let th = 2.0 * PI * (m.k[0] as f64 * x[0] + m.k[1] as f64 * x[1]);
            let d = 2.0 * PI * (m.sin * th.cos() - m.cos * th.sin());
            g[0] += m.k[0] as f64 * d;
            g[1] += m.k[1] as f64 * d;
        }
        g
    }

    pub fn scale(mut self, a: f64) -> Self {
        self.offset *= a;
        for m in &mut self.modes {
            m.cos *= a;
            m.sin *= a;
        }
        self
    }

    pub fn field(&self, grid: PeriodicGrid) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |x| self.eval(x))
    }

    /// Largest `|k_i|` present.
    pub fn bandwidth(&self) -> i64 {
        self.modes
            .iter()
            .map(|m| m.k[0].abs().max(m.k[1].abs()))
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_sums_are_seed_deterministic_and_consistent_across_grids() {
        let a = ModeSum::random(2, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = ModeSum::random(2, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.modes.len(), 24);
        let coarse = a.field(PeriodicGrid::new(2, 8).unwrap()).unwrap();
        let fine = a.field(PeriodicGrid::new(2, 16).unwrap()).unwrap();
        assert_eq!(coarse.values()[9], fine.values()[2 + 16 * 2]);
    }

    #[test]
    fn gradient_matches_spectral_derivative() {
        let s = ModeSum::random(1, 4, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let g = PeriodicGrid::new(1, 32).unwrap();
        let d = super::super::spectral::partial(&s.field(g).unwrap(), 0);
        for k in 0..32 {
            assert!((d.values()[k] - s.gradient(g.point(k))[0]).abs() < 1e-10);
        }
    }
}
