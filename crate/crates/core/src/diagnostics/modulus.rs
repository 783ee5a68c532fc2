//! Kernel-weighted moduli `∫∫ K(x−y)|ρ^x − ρ^y|^p (w^x + w^y)`, the
//! translation modulus, and the de-weighting bound.

use crate::error::{invalid, Error, Result};
use crate::fields::{norm, spectral_shift, Norm, PeriodicGrid, ScalarField};
use crate::harmonic::KernelWeights;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest `n^{2d}` for which full pair sums are allowed.
pub const FULL_PAIR_LIMIT: u64 = 1 << 24;

/// Number of independent random streams used by the Monte-Carlo estimator.
const STREAMS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PairSampler {
    /// Every ordered pair of grid points.
    Full,
    /// `x` swept cyclically over the grid, offsets drawn with probability
    /// proportional to the kernel cell weights.
    MonteCarlo {
        samples: usize,
        seed: u64,
        /// Refuse estimates whose relative standard error exceeds this.
        #[serde(default)]
        target_rel_err: Option<f64>,
    },
}

impl PairSampler {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        PairSampler::MonteCarlo {
            samples,
            seed,
            target_rel_err: None,
        }
    }

    /// Full sums when allowed, otherwise `samples` Monte-Carlo draws.
    pub fn auto(grid: PeriodicGrid, samples: usize, seed: u64) -> Self {
        if full_allowed(grid) {
            PairSampler::Full
        } else {
            Self::monte_carlo(samples, seed)
        }
    }
}

pub fn full_allowed(grid: PeriodicGrid) -> bool {
    (grid.len() as u64).saturating_mul(grid.len() as u64) <= FULL_PAIR_LIMIT
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub value: f64,
    /// Zero in full mode.
    pub std_err: f64,
    pub pairs: u64,
}

impl ModulusEstimate {
    /// Divided by `‖K‖_{L1}`.
    pub fn normalized(&self, kw: &KernelWeights) -> f64 {
        self.value / kw.l1()
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid("p", format!("must be finite and >= 1, got {p}")))
    }
}

fn pair_sum(rho: &ScalarField, w: Option<&ScalarField>, kw: &KernelWeights, sampler: &PairSampler, p: f64) -> Result<ModulusEstimate> {
    let g = rho.grid();
    if kw.grid() != g || w.is_some_and(|w| w.grid() != g) {
        return Err(Error::GridMismatch);
    }
    check_p(p)?;
    let r = rho.values();
    let wv = w.map(|w| w.values());
    let term = |x: usize, y: usize| {
        let d = (r[x] - r[y]).abs();
        let d = if p == 1.0 { d } else { d.powf(p) };
        match wv {
            Some(w) => d * (w[x] + w[y]),
            None => d,
        }
    };
    let weights = kw.weights();
    let offsets: Vec<(usize, isize, isize, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &wk)| wk > 0.0)
        .map(|(k, &wk)| {
            let (i, j) = g.unravel(k);
            (k, i as isize, j as isize, wk)
        })
        .collect();
    match *sampler {
        PairSampler::Full => {
            if !full_allowed(g) {
                return Err(invalid(
                    "sampler",
                    format!("full pair sums need n^(2d) <= 2^24, grid has {} points", g.len()),
                ));
            }
            let rows: Vec<f64> = (0..g.len())
                .into_par_iter()
                .map(|x| offsets.iter().map(|&(_, i, j, wk)| wk * term(x, g.offset(x, i, j))).sum())
                .collect();
            Ok(ModulusEstimate {
                value: rows.iter().sum::<f64>() * g.cell_volume(),
                std_err: 0.0,
                pairs: (g.len() * offsets.len()) as u64,
            })
        }
        PairSampler::MonteCarlo {
            samples,
            seed,
            target_rel_err,
        } => {
            if samples < 2 {
                return Err(invalid("samples", "Monte-Carlo needs at least 2 samples"));
            }
            let total: f64 = offsets.iter().map(|o| o.3).sum();
            let mut cdf = Vec::with_capacity(offsets.len());
            let mut acc = 0.0;
            for o in &offsets {
                acc += o.3 / total;
                cdf.push(acc);
            }
            let per = samples.div_ceil(STREAMS);
            let moments: Vec<(f64, f64, usize)> = (0..STREAMS)
                .into_par_iter()
                .map(|stream| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream as u64);
                    let start = stream * per;
                    let end = ((stream + 1) * per).min(samples);
                    let (mut s1, mut s2) = (0.0, 0.0);
                    for m in start..end {
                        let x = m % g.len();
                        let u: f64 = rng.random();
                        let pick = cdf.partition_point(|&c| c < u).min(offsets.len() - 1);
                        let (_, i, j, _) = offsets[pick];
                        let v = term(x, g.offset(x, i, j));
                        s1 += v;
                        s2 += v * v;
                    }
                    (s1, s2, end.saturating_sub(start))
                })
                .collect();
            let (s1, s2, count) = moments
                .iter()
                .fold((0.0, 0.0, 0usize), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
            let m = count as f64;
            let mean = s1 / m;
            let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
            let value = total * mean;
            let std_err = total * (var / m).sqrt();
            if let Some(target) = target_rel_err {
                if std_err > target * value.abs() {
                    return Err(Error::SamplerBudget {
                        achieved: if value != 0.0 { std_err / value.abs() } else { f64::INFINITY },
                        target,
                    });
                }
            }
            Ok(ModulusEstimate {
                value,
                std_err,
                pairs: count as u64,
            })
        }
    }
}

/// `R = ∫∫ K(x−y)|ρ^x − ρ^y|(w^x + w^y) dx dy`.
pub fn weighted_modulus(rho: &ScalarField, w: &ScalarField, kw: &KernelWeights, sampler: &PairSampler) -> Result<ModulusEstimate> {
    pair_sum(rho, Some(w), kw, sampler, 1.0)
}

/// `∫∫ K(x−y)|ρ^x − ρ^y|^p dx dy` (no weight factor).
pub fn unweighted_modulus(rho: &ScalarField, kw: &KernelWeights, sampler: &PairSampler, p: f64) -> Result<ModulusEstimate> {
    pair_sum(rho, None, kw, sampler, p)
}

/// `‖ρ(·) − ρ(·+z)‖_{Lp}` for each shift. Shifts must be grid multiples
/// unless `spectral` is set (then Fourier phase shifts are used).
pub fn translation_modulus(rho: &ScalarField, shifts: &[Vec<f64>], p: f64, spectral: bool) -> Result<Vec<f64>> {
    check_p(p)?;
    let g = rho.grid();
    let n = g.n() as f64;
    shifts
        .iter()
        .map(|z| {
            if z.len() != g.dim() {
                return Err(Error::DimensionMismatch(format!("shift {z:?} on a {}-d grid", g.dim())));
            }
            let cells: Vec<f64> = z.iter().map(|c| c * n).collect();
            let on_grid = cells.iter().all(|c| (c - c.round()).abs() < 1e-9);
            let shifted = if on_grid {
                let di = cells[0].round() as isize;
                let dj = cells.get(1).map_or(0, |c| c.round() as isize);
                rho.grid_shift(di, dj)
            } else if spectral {
                spectral_shift(rho, z)?
            } else {
                return Err(Error::NonGridShift(z.clone()));
            };
            norm(&rho.axpby(1.0, &shifted, -1.0)?, Norm::Lp(p))
        })
        .collect()
}

/// Constant of the second term of the de-weighting bound.
pub const DEWEIGHT_C: f64 = 2.0;

/// Smallest admissible `η` (the weight floor).
const ETA_MIN: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeweightBound {
    pub eta_star: f64,
    pub bound: f64,
}

/// `B(η) = R/η + c·‖K‖·budget/|log η|` with `c` = [`DEWEIGHT_C`].
pub fn deweight_value(r: f64, budget: f64, kernel_l1: f64, eta: f64) -> f64 {
    let second = DEWEIGHT_C * kernel_l1 * budget;
    let first = if r == 0.0 { 0.0 } else { r / eta };
    if second == 0.0 {
        first
    } else {
        first + second / eta.ln().abs()
    }
}

/// Minimises [`deweight_value`] over `η ∈ [1e-300, 1)`. `B` is convex in
/// `t = −log η`, with stationary point `R e^t t² = c‖K‖·budget`.
pub fn deweight_bound(r: f64, budget: f64, h0: f64, kernel_l1: f64) -> Result<DeweightBound> {
    if budget.is_infinite() {
        return Err(Error::InfiniteBudget);
    }
    for (name, v) in [("R_h0", r), ("budget", budget), ("kernel_l1", kernel_l1)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
        }
    }
    if !(h0 > 0.0 && h0 < 1.0) {
        return Err(invalid("h0", format!("must lie in (0, 1), got {h0}")));
    }
    let target = DEWEIGHT_C * kernel_l1 * budget;
    let t_max = -ETA_MIN.ln();
    if target == 0.0 {
        return Ok(DeweightBound { eta_star: 1.0, bound: r });
    }
    let t = if r == 0.0 {
        t_max
    } else {
        let f = |t: f64| r * t.exp() * t * t - target;
        let (mut lo, mut hi) = (0.0f64, t_max);
        if f(hi) <= 0.0 {
            t_max
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        }
    };
    let eta = (-t).exp();
    Ok(DeweightBound {
        eta_star: eta,
        bound: deweight_value(r, budget, kernel_l1, eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::KernelSpec;
    use std::f64::consts::PI;

    fn kw(n: usize, h0: f64) -> KernelWeights {
        KernelWeights::new(&KernelSpec::integrated(2.0, h0), PeriodicGrid::new(1, n).unwrap()).unwrap()
    }

    #[test]
    fn trivial_zeros() {
        let k = kw(64, 0.05);
        let g = k.grid();
        let c = ScalarField::constant(g, 2.0);
        let rho = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin()).unwrap();
        assert_eq!(weighted_modulus(&c, &rho.map(f64::abs).unwrap(), &k, &PairSampler::Full).unwrap().value, 0.0);
        assert_eq!(weighted_modulus(&rho, &ScalarField::zeros(g), &k, &PairSampler::Full).unwrap().value, 0.0);
        assert_eq!(unweighted_modulus(&c, &k, &PairSampler::Full, 1.0).unwrap().value, 0.0);
        assert!(unweighted_modulus(&rho, &k, &PairSampler::Full, 1.0).unwrap().value > 0.0);
    }

    #[test]
    fn unit_weight_is_twice_the_unweighted_sum() {
        let k = kw(64, 0.05);
        let g = k.grid();
        let rho = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin()).unwrap();
        let a = weighted_modulus(&rho, &ScalarField::constant(g, 1.0), &k, &PairSampler::Full).unwrap().value;
        let b = unweighted_modulus(&rho, &k, &PairSampler::Full, 1.0).unwrap().value;
        assert!((a - 2.0 * b).abs() < 1e-13 * a);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_refuses_tight_targets() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let k = KernelWeights::new(&KernelSpec::integrated(3.0, 0.1), g).unwrap();
        let rho = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos()).unwrap();
        let s = PairSampler::monte_carlo(20_000, 9);
        let a = unweighted_modulus(&rho, &k, &s, 1.0).unwrap();
        let b = unweighted_modulus(&rho, &k, &s, 1.0).unwrap();
        assert_eq!(a, b);
        let full = unweighted_modulus(&rho, &k, &PairSampler::Full, 1.0).unwrap().value;
        assert!((a.value - full).abs() < 4.0 * a.std_err, "{a:?} vs {full}");
        let strict = PairSampler::MonteCarlo {
            samples: 100,
            seed: 1,
            target_rel_err: Some(1e-6),
        };
        assert!(matches!(unweighted_modulus(&rho, &k, &strict, 1.0), Err(Error::SamplerBudget { .. })));
    }

    #[test]
    fn translation_values() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let rho = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin()).unwrap();
        let v = translation_modulus(&rho, &[vec![0.0], vec![0.5]], 2.0, false).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 2f64.sqrt()).abs() < 1e-13);
        assert!(matches!(translation_modulus(&rho, &[vec![0.01]], 2.0, false), Err(Error::NonGridShift(_))));
        let s = translation_modulus(&rho, &[vec![0.25]], 2.0, true).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn deweight_optimality_and_monotonicity() {
        assert_eq!(deweight_bound(0.0, 0.0, 0.1, 2.0).unwrap().bound, 0.0);
        let h0: f64 = 1e-3;
        let l1 = -h0.ln();
        let b = deweight_bound(1.0, 1.0, h0, l1).unwrap();
        for k in 0..100 {
            let eta = 10f64.powf(-0.05 - 6.0 * k as f64 / 99.0);
            assert!(b.bound <= deweight_value(1.0, 1.0, l1, eta) * (1.0 + 1e-12));
        }
        assert!(deweight_bound(1.0, 2.0, h0, l1).unwrap().bound > b.bound);
        assert!(matches!(deweight_bound(1.0, f64::INFINITY, h0, l1), Err(Error::InfiniteBudget)));
    }
}
