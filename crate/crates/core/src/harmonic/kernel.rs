//! Singular kernels `K_h`, their normalisations and the log-integrated
//! kernel `K_{h0} = ∫_{h0}^1 K̄_h dh/h`.
//!
//! Radial profile (`r` = minimum-image distance):
//!
//! ```text
//! r ≤ 1/2         (h + r)^{-a}
//! 1/2 < r < 2/3   (1 − σ)(h + r)^{-a} + σ A        σ = S(6(r − 1/2))
//! 2/3 ≤ r < 3/4   A (1 − S(12(r − 2/3)))
//! r ≥ 3/4         0
//! ```
//!
//! with `S(t) = 10t³ − 15t⁴ + 6t⁵` and `A = (3/2)^a`. The profile is `C²`,
//! nonnegative, independent of `h` for `r ≥ 2/3` and supported in `B(0, 3/4)`.
//! In 1-d the minimum-image distance never exceeds `1/2`.
//!
//! Grid fields built from several scales (normalised and integrated kernels)
//! hold cell averages, `s^{-d} ∫_cell K`, so that their grid sums are exact
//! continuum integrals.

use crate::error::{invalid, Error, Result};
use crate::fields::{PeriodicGrid, ScalarField};
use crate::quadrature::gauss_legendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

/// Default number of log-spaced nodes for `K_{h0}`.
pub const DEFAULT_NODES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelScale {
    Single { h: f64 },
    Integrated { h0: f64, nodes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub a: f64,
    pub scale: KernelScale,
}

impl KernelSpec {
    pub fn single(a: f64, h: f64) -> Self {
        Self {
            a,
            scale: KernelScale::Single { h },
        }
    }

    pub fn integrated(a: f64, h0: f64) -> Self {
        Self {
            a,
            scale: KernelScale::Integrated {
                h0,
                nodes: DEFAULT_NODES,
            },
        }
    }

    pub fn with_nodes(mut self, m: usize) -> Self {
        if let KernelScale::Integrated { nodes, .. } = &mut self.scale {
            *nodes = m;
        }
        self
    }

    /// Default exponent `a = d + 1`.
    pub fn default_exponent(dim: usize) -> f64 {
        dim as f64 + 1.0
    }

    /// Smallest scale the kernel involves (`h`, or `h0`).
    pub fn finest_scale(&self) -> f64 {
        match self.scale {
            KernelScale::Single { h } => h,
            KernelScale::Integrated { h0, .. } => h0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.a > dim as f64 && self.a.is_finite()) {
            return Err(invalid("a", format!("kernel exponent must exceed d = {dim}, got {}", self.a)));
        }
        match self.scale {
            KernelScale::Single { h } if !(h > 0.0 && h < 1.0) => {
                Err(invalid("h", format!("must lie in (0, 1), got {h}")))
            }
            KernelScale::Integrated { h0, .. } if !(h0 > 0.0 && h0 < 1.0) => {
                Err(invalid("h0", format!("must lie in (0, 1), got {h0}")))
            }
            KernelScale::Integrated { nodes, .. } if nodes < 16 => {
                Err(invalid("nodes", format!("need at least 16 log nodes, got {nodes}")))
            }
            _ => Ok(()),
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn smoothstep_derivative(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

/// Radial profile `K_h(r)`.
pub fn kernel_profile(a: f64, h: f64, r: f64) -> f64 {
    let far = 1.5f64.powf(a);
    if r <= 0.5 {
        (h + r).powf(-a)
    } else if r < 2.0 / 3.0 {
        let s = smoothstep(6.0 * (r - 0.5));
        (1.0 - s) * (h + r).powf(-a) + s * far
    } else if r < 0.75 {
        far * (1.0 - smoothstep(12.0 * (r - 2.0 / 3.0)))
    } else {
        0.0
    }
}

/// Radial derivative `dK_h/dr`.
pub fn kernel_profile_derivative(a: f64, h: f64, r: f64) -> f64 {
    let far = 1.5f64.powf(a);
    if r <= 0.5 {
        -a * (h + r).powf(-a - 1.0)
    } else if r < 2.0 / 3.0 {
        let t = 6.0 * (r - 0.5);
        let s = smoothstep(t);
        let ds = 6.0 * smoothstep_derivative(t);
        -a * (1.0 - s) * (h + r).powf(-a - 1.0) + ds * (far - (h + r).powf(-a))
    } else if r < 0.75 {
        -12.0 * far * smoothstep_derivative(12.0 * (r - 2.0 / 3.0))
    } else {
        0.0
    }
}

fn offset_radius(grid: PeriodicGrid, idx: usize) -> f64 {
    let (i, j) = grid.unravel(idx);
    let s = grid.spacing();
    let x = grid.signed_offset(i) as f64 * s;
    let y = if grid.dim() == 2 {
        grid.signed_offset(j) as f64 * s
    } else {
        0.0
    };
    x.hypot(y)
}

/// Point samples of `K_h` at every grid offset from the origin.
pub fn kernel_field(spec: &KernelSpec, grid: PeriodicGrid) -> Result<ScalarField> {
    spec.validate(grid.dim())?;
    let KernelScale::Single { h } = spec.scale else {
        return Err(invalid("scale", "kernel_field needs a single-scale spec"));
    };
    let values = (0..grid.len())
        .map(|k| kernel_profile(spec.a, h, offset_radius(grid, k)))
        .collect();
    ScalarField::new(grid, values)
}

/// `max |z| |∇K_h(z)| / K_h(z)` over grid offsets with `0 < |z| ≤ 1/2`.
pub fn log_gradient_ratio(a: f64, h: f64, grid: PeriodicGrid) -> f64 {
    (1..grid.len())
        .map(|k| offset_radius(grid, k))
        .filter(|&r| r > 0.0 && r <= 0.5)
        .map(|r| r * kernel_profile_derivative(a, h, r).abs() / kernel_profile(a, h, r))
        .fold(0.0, f64::max)
}

/// Per-axis pieces of a cell folded into `[0, 1/2]`: `(lo, hi, multiplicity)`.
fn folded_interval(k: isize, n: usize, s: f64) -> (f64, f64, f64) {
    let k = k.unsigned_abs();
    if k == 0 {
        (0.0, 0.5 * s, 2.0)
    } else if k == n / 2 {
        (0.5 - 0.5 * s, 0.5, 2.0)
    } else {
        (k as f64 * s - 0.5 * s, k as f64 * s + 0.5 * s, 1.0)
    }
}

/// `∫_0^R (h + r)^{-a} r dr`.
fn radial_moment(a: f64, h: f64, r: f64) -> f64 {
    let anti = |t: f64| (h + t).powf(2.0 - a) / (2.0 - a) - h * (h + t).powf(1.0 - a) / (1.0 - a);
    anti(r) - anti(0.0)
}

struct Rule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Rule {
    fn new(order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        Self { x, w }
    }

    fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        self.x.iter().zip(&self.w).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
    }
}

/// `∫_{[x0,x1]×[y0,y1]} K_h(|z|) dz` for a first-quadrant rectangle.
fn rectangle_integral(a: f64, h: f64, rect: [f64; 4], rule: &Rule) -> f64 {
    let [x0, x1, y0, y1] = rect;
    if x0 == 0.0 && y0 == 0.0 {
        // corner at the singularity: polar form over the square [0, c]²
        debug_assert!((x1 - y1).abs() < 1e-15);
        let c = x1;
        return 2.0 * rule.integrate(0.0, FRAC_PI_4, |th| radial_moment(a, h, c / th.cos()));
    }
    let rmin = x0.hypot(y0);
    if rmin >= 0.75 {
        return 0.0;
    }
    let width = (x1 - x0).max(y1 - y0);
    let m = ((2.0 * width / (h + rmin)).ceil() as usize).clamp(1, 64);
    let dx = (x1 - x0) / m as f64;
    let dy = (y1 - y0) / m as f64;
    let mut total = 0.0;
    for p in 0..m {
        for q in 0..m {
            let (xa, ya) = (x0 + p as f64 * dx, y0 + q as f64 * dy);
            total += rule.integrate(xa, xa + dx, |x| {
                rule.integrate(ya, ya + dy, |y| kernel_profile(a, h, x.hypot(y)))
            });
        }
    }
    total
}

/// Exact 1-d cell integral of `(h + |z|)^{-a}` over a folded interval.
fn interval_integral(a: f64, h: f64, lo: f64, hi: f64) -> f64 {
    let anti = |r: f64| (h + r).powf(1.0 - a) / (1.0 - a);
    anti(hi) - anti(lo)
}

/// Cell integrals `∫_cell K_h` at every grid offset.
pub fn cell_integrals(a: f64, h: f64, grid: PeriodicGrid) -> Vec<f64> {
    let n = grid.n();
    let s = grid.spacing();
    if grid.dim() == 1 {
        return (0..n)
            .map(|k| {
                let (lo, hi, mult) = folded_interval(grid.signed_offset(k), n, s);
                mult * interval_integral(a, h, lo, hi)
            })
            .collect();
    }
    let rule = Rule::new(8);
    let half = n / 2;
    // octant table over folded offsets 0 ≤ q ≤ p ≤ n/2
    let table: Vec<Vec<f64>> = (0..=half)
        .into_par_iter()
        .map(|p| {
            (0..=p)
                .map(|q| {
                    let (x0, x1, mx) = folded_interval(p as isize, n, s);
                    let (y0, y1, my) = folded_interval(q as isize, n, s);
                    mx * my * rectangle_integral(a, h, [x0, x1, y0, y1], &rule)
                })
                .collect()
        })
        .collect();
    (0..grid.len())
        .map(|idx| {
            let (i, j) = grid.unravel(idx);
            let p = grid.signed_offset(i).unsigned_abs();
            let q = grid.signed_offset(j).unsigned_abs();
            if q <= p {
                table[p][q]
            } else {
                table[q][p]
            }
        })
        .collect()
}

/// Geometric midpoint nodes of `∫_{h0}^1 · dh/h`: `(h_j, weight)` with
/// weights `|log h0|/m`.
pub fn log_nodes(h0: f64, m: usize) -> Vec<(f64, f64)> {
    let len = -h0.ln();
    let w = len / m as f64;
    (0..m)
        .map(|j| {
            let t = h0.ln() + (j as f64 + 0.5) * w;
            (t.exp(), w)
        })
        .collect()
}

/// Cell-integrated kernel on a grid, usable for quadrature of pair
/// integrals at any resolution (no resolution requirement).
#[derive(Clone, Debug, PartialEq)]
pub struct KernelWeights {
    grid: PeriodicGrid,
    spec: KernelSpec,
    /// `∫_cell K` per offset.
    weights: Vec<f64>,
    l1: f64,
}

impl KernelWeights {
    /// For a single-scale spec the weights integrate `K_h`; for an integrated
    /// spec they integrate `K_{h0} = Σ_j ω_j K_{h_j}/‖K_{h_j}‖`.
    pub fn new(spec: &KernelSpec, grid: PeriodicGrid) -> Result<Self> {
        spec.validate(grid.dim())?;
        let weights = match spec.scale {
            KernelScale::Single { h } => cell_integrals(spec.a, h, grid),
            KernelScale::Integrated { h0, nodes } => {
                let parts: Vec<Vec<f64>> = log_nodes(h0, nodes)
                    .into_par_iter()
                    .map(|(h, w)| {
                        let c = cell_integrals(spec.a, h, grid);
                        let norm: f64 = c.iter().sum();
                        c.into_iter().map(|v| w * v / norm).collect()
                    })
                    .collect();
                let mut acc = vec![0.0; grid.len()];
                for p in parts {
                    for (a, v) in acc.iter_mut().zip(p) {
                        *a += v;
                    }
                }
                acc
            }
        };
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("kernel cell integrals".into()));
        }
        let l1 = weights.iter().sum();
        Ok(Self {
            grid,
            spec: *spec,
            weights,
            l1,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_cell K` at flat offset index `k`.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// `‖K‖_{L1}` (sum of the cell integrals).
    pub fn l1(&self) -> f64 {
        self.l1
    }

    /// Cell averages `s^{-d} ∫_cell K` as a field.
    pub fn averages(&self) -> ScalarField {
        let inv = 1.0 / self.grid.cell_volume();
        ScalarField::from_raw(self.grid, self.weights.iter().map(|w| w * inv).collect())
    }
}

fn check_resolution(spec: &KernelSpec, grid: PeriodicGrid) -> Result<()> {
    let h = spec.finest_scale();
    if grid.spacing() > 0.5 * h {
        return Err(Error::Unresolved {
            spacing: grid.spacing(),
            h,
        });
    }
    Ok(())
}

/// `‖K‖_{L1}` of a single-scale or integrated kernel; refuses grids with
/// spacing above half the finest scale.
pub fn kernel_l1(spec: &KernelSpec, grid: PeriodicGrid) -> Result<f64> {
    spec.validate(grid.dim())?;
    check_resolution(spec, grid)?;
    Ok(KernelWeights::new(spec, grid)?.l1())
}

/// Cell averages of `K̄_h = K_h/‖K_h‖_{L1}`; integrates to 1 on the grid.
pub fn normalized_kernel(spec: &KernelSpec, grid: PeriodicGrid) -> Result<ScalarField> {
    spec.validate(grid.dim())?;
    let KernelScale::Single { .. } = spec.scale else {
        return Err(invalid("scale", "normalized_kernel needs a single-scale spec"));
    };
    check_resolution(spec, grid)?;
    let kw = KernelWeights::new(spec, grid)?;
    let l1 = kw.l1();
    kw.averages().map(|v| v / l1)
}

/// Cell averages of `K_{h0}`; integrates to `|log h0|` on the grid.
pub fn integrated_kernel(spec: &KernelSpec, grid: PeriodicGrid) -> Result<ScalarField> {
    spec.validate(grid.dim())?;
    let KernelScale::Integrated { .. } = spec.scale else {
        return Err(invalid("scale", "integrated_kernel needs an h0 spec"));
    };
    check_resolution(spec, grid)?;
    Ok(KernelWeights::new(spec, grid)?.averages())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g1(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, n).unwrap()
    }

    #[test]
    fn profile_values_and_support() {
        assert_eq!(kernel_profile(2.0, 0.1, 0.0), 0.1f64.powi(-2));
        assert_relative_eq!(kernel_profile(2.0, 0.1, 0.4), 4.0, max_relative = 1e-14);
        assert_eq!(kernel_profile(2.0, 0.1, 0.75), 0.0);
        assert_eq!(kernel_profile(3.0, 0.1, 0.7), kernel_profile(3.0, 0.3, 0.7));
    }

    #[test]
    fn profile_is_c1_at_the_joins() {
        for (a, h) in [(2.0, 0.01), (3.0, 0.2)] {
            for r in [0.5, 2.0 / 3.0, 0.75] {
                let e = 1e-7;
                assert!((kernel_profile(a, h, r - e) - kernel_profile(a, h, r + e)).abs() < 1e-5);
                let dl = kernel_profile_derivative(a, h, r - e);
                let dr = kernel_profile_derivative(a, h, r + e);
                assert!((dl - dr).abs() < 1e-4 * (1.0 + dl.abs()), "{r}: {dl} {dr}");
            }
            for k in 1..300 {
                let r = 0.0025 * k as f64 + 1e-4;
                let fd = (kernel_profile(a, h, r + 1e-7) - kernel_profile(a, h, r - 1e-7)) / 2e-7;
                let d = kernel_profile_derivative(a, h, r);
                assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()), "r = {r}");
            }
        }
    }

    #[test]
    fn one_dimensional_l1_matches_closed_form() {
        let h: f64 = 0.01;
        let exact = 2.0 * (1.0 / h - 1.0 / (0.5 + h));
        let l1 = kernel_l1(&KernelSpec::single(2.0, h), g1(256)).unwrap();
        assert_relative_eq!(l1, exact, max_relative = 1e-12);
        assert!(matches!(
            kernel_l1(&KernelSpec::single(2.0, h), g1(64)),
            Err(Error::Unresolved { .. })
        ));
    }

    #[test]
    fn two_dimensional_l1_matches_radial_quadrature() {
        let (a, h) = (3.0, 0.05);
        let grid = PeriodicGrid::new(2, 64).unwrap();
        let l1 = KernelWeights::new(&KernelSpec::single(a, h), grid).unwrap().l1();
        // ∫ over the unit square of K(|z|): full circles up to 1/2, clipped arcs beyond
        let inner = crate::quadrature::integrate(
            |r| 2.0 * std::f64::consts::PI * r * kernel_profile(a, h, r),
            0.0,
            0.5,
            1e-12,
        )
        .unwrap();
        let outer = crate::quadrature::integrate(
            |r| 8.0 * r * (FRAC_PI_4 - (0.5 / r).acos()) * kernel_profile(a, h, r),
            0.5,
            0.5f64.sqrt(),
            1e-12,
        )
        .unwrap();
        assert_relative_eq!(l1, inner + outer, max_relative = 1e-9);
    }

    #[test]
    fn normalized_kernel_integrates_to_one() {
        for h in [0.4, 0.1, 0.02] {
            let k = normalized_kernel(&KernelSpec::single(2.0, h), g1(512)).unwrap();
            assert!((k.integral() - 1.0).abs() < 1e-12);
        }
        let g2 = PeriodicGrid::new(2, 32).unwrap();
        let k = normalized_kernel(&KernelSpec::single(3.0, 0.2), g2).unwrap();
        assert!((k.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrated_kernel_mass_and_monotonicity() {
        let g = g1(1024);
        let a = integrated_kernel(&KernelSpec::integrated(2.0, 1e-2), g).unwrap();
        let b = integrated_kernel(&KernelSpec::integrated(2.0, 5e-3), g).unwrap();
        assert_relative_eq!(a.integral(), -(1e-2f64).ln(), max_relative = 1e-12);
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| y >= x));
        assert!(a.min() >= 0.0);
    }

    #[test]
    fn integrated_kernel_vanishes_as_h0_tends_to_one() {
        let k = integrated_kernel(&KernelSpec::integrated(2.0, 1.0 - 1e-12), g1(64)).unwrap();
        assert!(k.max_abs() < 1e-10);
    }

    #[test]
    fn power_region_log_gradient_ratio_is_bounded_by_a() {
        for h in [0.1, 0.01, 0.001] {
            let r = log_gradient_ratio(2.0, h, g1(4096));
            assert!(r < 2.0 && r > 1.0);
        }
    }
}
