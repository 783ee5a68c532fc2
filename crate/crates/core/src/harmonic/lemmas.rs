//! Numerical probes of the three harmonic-analysis lemmas:
//! the pointwise difference bound by `D_{|x−y|}`, the domination
//! `D_h f ≤ C Mf`, and the square-function estimate for translations of `D_h`.

use super::dh::dh_op;
use super::kernel::{KernelSpec, KernelWeights};
use super::maximal::{dyadic_radii, maximal_op};
use crate::error::{invalid, Error, Result};
use crate::fields::{
    grad_magnitude, gradient, torus_distance, vector_norm, Field, Norm, PeriodicGrid, ScalarField,
    VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn gradient_magnitude(u: &Field) -> ScalarField {
    match u {
        Field::Scalar(s) => gradient(s).magnitude(),
        Field::Vector(v) => grad_magnitude(v),
    }
}

fn field_grid(u: &Field) -> PeriodicGrid {
    match u {
        Field::Scalar(s) => s.grid(),
        Field::Vector(v) => v.grid(),
    }
}

fn point_difference(u: &Field, a: usize, b: usize) -> f64 {
    match u {
        Field::Scalar(s) => (s.values()[a] - s.values()[b]).abs(),
        Field::Vector(v) => v
            .components()
            .iter()
            .map(|c| (c.values()[a] - c.values()[b]).powi(2))
            .sum::<f64>()
            .sqrt(),
    }
}

/// Squared lattice distance between two flat indices, in grid units.
fn lattice_distance_sq(grid: PeriodicGrid, a: usize, b: usize) -> u64 {
    let (ia, ja) = grid.unravel(a);
    let (ib, jb) = grid.unravel(b);
    let di = grid.signed_offset((ia + grid.n() - ib) % grid.n()).unsigned_abs() as u64;
    let dj = grid.signed_offset((ja + grid.n() - jb) % grid.n()).unsigned_abs() as u64;
    di * di + dj * dj
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseLemmaReport {
    /// `max |u(x)−u(y)| / (|x−y| (D u(x) + D u(y)))` over the sampled pairs.
    pub c_hat: f64,
    pub pairs: usize,
    /// Pairs with both numerator and denominator zero.
    pub skipped: usize,
    /// Pairs with zero denominator but nonzero numerator.
    pub flagged: usize,
}

/// Samples `pairs` point pairs uniformly on the torus (snapped to grid
/// cells, so refined grids see nearby pairs for one seed).
pub fn verify_pointwise_lemma(u: &Field, pairs: usize, seed: u64) -> Result<PointwiseLemmaReport> {
    let grid = field_grid(u);
    let gm = gradient_magnitude(u);
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let i = (rng.random::<f64>() * n as f64) as usize % n;
        let j = if grid.dim() == 2 {
            (rng.random::<f64>() * n as f64) as usize % n
        } else {
            0
        };
        grid.ravel(i, j)
    };
    let scale = 1e-12 * gm.max_abs().max(1e-300);
    let mut cache: BTreeMap<u64, ScalarField> = BTreeMap::new();
    let (mut c_hat, mut skipped, mut flagged) = (0.0f64, 0usize, 0usize);
    for _ in 0..pairs {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let num = point_difference(u, a, b);
        if a == b {
            skipped += 1;
            continue;
        }
        let key = lattice_distance_sq(grid, a, b);
        let dist = torus_distance(&grid.point(a)[..grid.dim()], &grid.point(b)[..grid.dim()]);
        let d = match cache.get(&key) {
            Some(d) => d,
            None => {
                let d = dh_op(&gm, dist)?;
                cache.entry(key).or_insert(d)
            }
        };
        let den = dist * (d.values()[a] + d.values()[b]);
        if den <= scale * dist {
            if num <= 1e-12 * (1.0 + num) {
                skipped += 1;
            } else {
                flagged += 1;
            }
            continue;
        }
        c_hat = c_hat.max(num / den);
    }
    Ok(PointwiseLemmaReport {
        c_hat,
        pairs,
        skipped,
        flagged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhMaxScan {
    /// `(h, max_x D_h f / Mf)` along the dyadic ladder.
    pub ladder: Vec<(f64, f64)>,
    pub constant: f64,
}

/// Ratio scan `max_x D_h f(x) / Mf(x)` for `h` on the dyadic ladder.
pub fn compare_dh_max(f: &ScalarField) -> Result<DhMaxScan> {
    let mf = maximal_op(f)?;
    let floor = 1e-300;
    let ladder = dyadic_radii(f.grid())
        .into_iter()
        .map(|h| {
            let d = dh_op(f, h)?;
            let ratio = d
                .values()
                .iter()
                .zip(mf.values())
                .filter(|(_, &m)| m > floor)
                .map(|(&dv, &m)| dv / m)
                .fold(0.0, f64::max);
            Ok((h, ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    let constant = ladder.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(DhMaxScan { ladder, constant })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareFunctionPoint {
    pub h0: f64,
    /// `∫_{h0}^1 ∫ K̄_h(z) ‖D_{|z|}u − D_{|z|}u(·+z)‖_{L2} dz dh/h`.
    pub lhs: f64,
    /// `lhs / (|log h0|^{1/2} ‖u‖_{H1})`.
    pub statistic: f64,
}

/// Square-function statistic for several `h0` at once (the translated
/// `D_{|z|}` fields are shared). Each `h0` must lie in `(0, 1/4)` and be
/// resolved by the grid (spacing ≤ h0/2).
pub fn square_function_profile(u: &VectorField, h0s: &[f64], a: f64, nodes: usize) -> Result<Vec<SquareFunctionPoint>> {
    let grid = u.grid();
    for &h0 in h0s {
        if !(h0 > 0.0 && h0 < 0.25) {
            return Err(invalid("h0", format!("must lie in (0, 1/4), got {h0}")));
        }
        if grid.spacing() > 0.5 * h0 {
            return Err(Error::Unresolved {
                spacing: grid.spacing(),
                h: h0,
            });
        }
    }
    let kernels = h0s
        .iter()
        .map(|&h0| KernelWeights::new(&KernelSpec::integrated(a, h0).with_nodes(nodes), grid))
        .collect::<Result<Vec<_>>>()?;
    let h1 = vector_norm(u, Norm::H1)?;
    let gm = grad_magnitude(u);
    let mut lhs = vec![0.0; h0s.len()];
    if h1 > 0.0 && gm.max_abs() > 0.0 {
        let mut cache: BTreeMap<u64, ScalarField> = BTreeMap::new();
        for k in 1..grid.len() {
            let key = lattice_distance_sq(grid, k, 0);
            let dist = torus_distance(&grid.point(k)[..grid.dim()], &[0.0, 0.0][..grid.dim()]);
            if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(key) {
                e.insert(dh_op(&gm, dist)?);
            }
            let d = &cache[&key];
            let (i, j) = grid.unravel(k);
            let shifted = d.grid_shift(grid.signed_offset(i), grid.signed_offset(j));
            let diff = d.axpby(1.0, &shifted, -1.0)?;
            let l2 = crate::fields::norm(&diff, Norm::Lp(2.0))?;
            for (acc, kw) in lhs.iter_mut().zip(&kernels) {
                *acc += kw.weight(k) / kw.l1() * (-kw.spec().finest_scale().ln()) * l2;
            }
        }
    }
    Ok(h0s
        .iter()
        .zip(lhs)
        .map(|(&h0, lhs)| SquareFunctionPoint {
            h0,
            lhs,
            statistic: if h1 > 0.0 {
                lhs / ((-h0.ln()).sqrt() * h1)
            } else {
                0.0
            },
        })
        .collect())
}

/// Single-`h0` form of [`square_function_profile`].
pub fn square_function_stat(u: &VectorField, h0: f64, spec: &KernelSpec) -> Result<f64> {
    let nodes = match spec.scale {
        super::kernel::KernelScale::Integrated { nodes, .. } => nodes,
        super::kernel::KernelScale::Single { .. } => super::kernel::DEFAULT_NODES,
    };
    Ok(square_function_profile(u, &[h0], spec.a, nodes)?[0].statistic)
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::modes::ModeSum;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_zero_constant() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let r = verify_pointwise_lemma(&Field::Scalar(ScalarField::constant(g, 1.0)), 500, 3).unwrap();
        assert_eq!(r.c_hat, 0.0);
        assert_eq!(r.flagged, 0);
    }

    #[test]
    fn sine_constant_is_stable_under_refinement() {
        let c: Vec<f64> = [256, 512]
            .iter()
            .map(|&n| {
                let g = PeriodicGrid::new(1, n).unwrap();
                let u = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin()).unwrap();
                verify_pointwise_lemma(&Field::Scalar(u), 10_000, 11).unwrap().c_hat
            })
            .collect();
        let ratio = c[1] / c[0];
        assert!(c[0] > 0.0 && (0.8..=1.25).contains(&ratio), "{c:?}");
    }

    #[test]
    fn dh_is_dominated_by_maximal_function() {
        let g = PeriodicGrid::new(1, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = ModeSum::random(1, 12, 1.0, &mut rng).unwrap().field(g).unwrap();
        let scan = compare_dh_max(&gradient(&u).magnitude()).unwrap();
        assert_eq!(scan.ladder.len(), 9);
        assert!(scan.constant.is_finite() && scan.constant > 0.0 && scan.constant < 10.0);
    }

    #[test]
    fn square_function_zero_cases() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let zero = VectorField::zeros(g);
        let spec = KernelSpec::integrated(2.0, 0.1);
        assert_eq!(square_function_stat(&zero, 0.1, &spec).unwrap(), 0.0);
        let c = VectorField::new(vec![ScalarField::constant(g, 2.0)]).unwrap();
        assert_eq!(square_function_stat(&c, 0.1, &spec).unwrap(), 0.0);
        assert!(square_function_stat(&c, 0.3, &spec).is_err());
        assert!(matches!(square_function_stat(&c, 0.01, &spec), Err(Error::Unresolved { .. })));
    }

    #[test]
    fn slope_fit() {
        assert!((fit_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-14);
    }
}
