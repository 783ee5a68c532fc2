//! Fourier-space differential operators on the unit torus.
//!
//! Wavenumbers are `2πξ` with integer `ξ ∈ [-n/2, n/2)`. First-derivative
//! symbols vanish on the Nyquist mode so real fields stay real; even symbols
//! (Laplacian, Helmholtz) keep it.

use super::{PeriodicGrid, ScalarField, VectorField};
use crate::error::{invalid, Error, Result};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn transform(grid: PeriodicGrid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let fft = plan(n, inverse);
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    if grid.dim() == 2 {
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                col[j] = data[i + n * j];
            }
            fft.process(&mut col);
            for j in 0..n {
                data[i + n * j] = col[j];
            }
        }
    }
}

/// Unnormalised forward DFT of real samples.
pub(crate) fn fft_forward(grid: PeriodicGrid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, false);
    data
}

/// Inverse DFT (normalised by `1/len`), real part.
pub(crate) fn fft_inverse_real(grid: PeriodicGrid, mut data: Vec<Complex64>) -> Vec<f64> {
    transform(grid, &mut data, true);
    let scale = 1.0 / grid.len() as f64;
    data.into_iter().map(|c| c.re * scale).collect()
}

/// Integer mode number of FFT index `k`; the Nyquist index maps to `-n/2`.
#[inline]
pub(crate) fn mode(k: usize, n: usize) -> i64 {
    if k >= n / 2 {
        k as i64 - n as i64
    } else {
        k as i64
    }
}

/// Per-axis mode numbers of a flat spectral index, `[ξx, ξy]`.
#[inline]
pub(crate) fn modes(grid: PeriodicGrid, idx: usize) -> [i64; 2] {
    let n = grid.n();
    let (i, j) = grid.unravel(idx);
    [mode(i, n), if grid.dim() == 2 { mode(j, n) } else { 0 }]
}

#[inline]
fn derivative_wavenumber(xi: i64, n: usize) -> f64 {
    if xi == -(n as i64) / 2 {
        0.0
    } else {
        2.0 * PI * xi as f64
    }
}

#[inline]
fn wavenumber_sq(xi: [i64; 2]) -> f64 {
    4.0 * PI * PI * ((xi[0] * xi[0] + xi[1] * xi[1]) as f64)
}

fn apply_symbol(f: &ScalarField, symbol: impl Fn([i64; 2]) -> Complex64) -> ScalarField {
    let g = f.grid();
    let mut spec = fft_forward(g, f.values());
    for (idx, c) in spec.iter_mut().enumerate() {
        *c *= symbol(modes(g, idx));
    }
    ScalarField::from_raw(g, fft_inverse_real(g, spec))
}

/// `∂f/∂x_axis`.
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    let n = f.grid().n();
    apply_symbol(f, |xi| Complex64::new(0.0, derivative_wavenumber(xi[axis], n)))
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let comps = (0..f.grid().dim()).map(|a| partial(f, a)).collect();
    VectorField::new(comps).expect("gradient has one component per axis")
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let n = g.n();
    let mut acc = vec![Complex64::new(0.0, 0.0); g.len()];
    for (axis, comp) in v.components().iter().enumerate() {
        let spec = fft_forward(g, comp.values());
        for (idx, (a, c)) in acc.iter_mut().zip(spec).enumerate() {
            let xi = modes(g, idx);
            *a += c * Complex64::new(0.0, derivative_wavenumber(xi[axis], n));
        }
    }
    ScalarField::from_raw(g, fft_inverse_real(g, acc))
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    apply_symbol(f, |xi| Complex64::new(-wavenumber_sq(xi), 0.0))
}

pub fn vector_laplacian(v: &VectorField) -> VectorField {
    VectorField::new(v.components().iter().map(laplacian).collect()).expect("same shape")
}

/// Pointwise Frobenius norm of the velocity gradient, `|∇u|`.
pub fn grad_magnitude(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let mut sq = vec![0.0; g.len()];
    for comp in v.components() {
        for axis in 0..g.dim() {
            let d = partial(comp, axis);
            for (s, x) in sq.iter_mut().zip(d.values()) {
                *s += x * x;
            }
        }
    }
    ScalarField::from_raw(g, sq.into_iter().map(f64::sqrt).collect())
}

fn check_coefficients(mu: f64, alpha: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be positive, got {mu}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    Ok(())
}

/// Solves `(-μΔ + α) v = f` componentwise.
pub fn helmholtz_solve(f: &VectorField, mu: f64, alpha: f64) -> Result<VectorField> {
    check_coefficients(mu, alpha)?;
    VectorField::new(
        f.components()
            .iter()
            .map(|c| apply_symbol(c, |xi| Complex64::new(1.0 / (mu * wavenumber_sq(xi) + alpha), 0.0)))
            .collect(),
    )
}

/// `(-μΔ + α) v`.
pub fn helmholtz_apply(v: &VectorField, mu: f64, alpha: f64) -> Result<VectorField> {
    check_coefficients(mu, alpha)?;
    VectorField::new(
        v.components()
            .iter()
            .map(|c| apply_symbol(c, |xi| Complex64::new(mu * wavenumber_sq(xi) + alpha, 0.0)))
            .collect(),
    )
}

/// `g = Δ⁻¹ div R`: the zero-mean solution of `Δg = div R`.
pub fn inv_laplacian_div(r: &VectorField) -> ScalarField {
    let g = r.grid();
    let n = g.n();
    let mut acc = vec![Complex64::new(0.0, 0.0); g.len()];
    for (axis, comp) in r.components().iter().enumerate() {
        let spec = fft_forward(g, comp.values());
        for (idx, (a, c)) in acc.iter_mut().zip(spec).enumerate() {
            let xi = modes(g, idx);
            let k2 = wavenumber_sq(xi);
            if k2 > 0.0 {
                *a += c * Complex64::new(0.0, derivative_wavenumber(xi[axis], n) / -k2);
            }
        }
    }
    acc[0] = Complex64::new(0.0, 0.0);
    ScalarField::from_raw(g, fft_inverse_real(g, acc))
}

/// `exp(tΔ) f`, applied exactly in Fourier space (`t ≥ 0`).
pub fn heat_flow(f: &ScalarField, t: f64) -> ScalarField {
    apply_symbol(f, |xi| Complex64::new((-t * wavenumber_sq(xi)).exp(), 0.0))
}

/// Two-thirds rule: removes every mode with `|ξ| > n/3` along some axis.
pub fn dealias(f: &ScalarField) -> ScalarField {
    let cut = f.grid().n() as i64 / 3;
    apply_symbol(f, |xi| {
        if xi[0].abs() > cut || xi[1].abs() > cut {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// Periodic convolution `Σ_k w(k) f(x − k)` with `w` laid out like a field
/// (offset `(i, j)` at `i + n j`).
pub fn circular_convolve(f: &ScalarField, w: &[f64]) -> Result<ScalarField> {
    let g = f.grid();
    if w.len() != g.len() {
        return Err(Error::DimensionMismatch(format!(
            "convolution weights have {} entries, grid has {}",
            w.len(),
            g.len()
        )));
    }
    let mut a = fft_forward(g, f.values());
    let b = fft_forward(g, w);
    for (x, y) in a.iter_mut().zip(b) {
        *x *= y;
    }
    ScalarField::new(g, fft_inverse_real(g, a))
}

/// Translation by an arbitrary vector via Fourier phases: returns `f(· + z)`.
pub fn spectral_shift(f: &ScalarField, z: &[f64]) -> Result<ScalarField> {
    let d = f.grid().dim();
    if z.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "shift has {} components on a {d}-d grid",
            z.len()
        )));
    }
    let zz = [z[0], if d == 2 { z[1] } else { 0.0 }];
    Ok(apply_symbol(f, |xi| {
        let phase = 2.0 * PI * (xi[0] as f64 * zz[0] + xi[1] as f64 * zz[1]);
        Complex64::from_polar(1.0, phase)
    }))
}

/// Operators selectable by [`spectral_derivative`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeOp {
    Gradient,
    Divergence,
    Laplacian,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
}

/// Rank-checked dispatch: gradient needs a scalar, divergence a vector,
/// the Laplacian accepts either.
pub fn spectral_derivative(f: &Field, op: DerivativeOp) -> Result<Field> {
    match (op, f) {
        (DerivativeOp::Gradient, Field::Scalar(s)) => Ok(Field::Vector(gradient(s))),
        (DerivativeOp::Divergence, Field::Vector(v)) => Ok(Field::Scalar(divergence(v))),
        (DerivativeOp::Laplacian, Field::Scalar(s)) => Ok(Field::Scalar(laplacian(s))),
        (DerivativeOp::Laplacian, Field::Vector(v)) => Ok(Field::Vector(vector_laplacian(v))),
        (DerivativeOp::Gradient, Field::Vector(_)) => Err(Error::DimensionMismatch(
            "gradient of a vector field is not supported".into(),
        )),
        (DerivativeOp::Divergence, Field::Scalar(_)) => Err(Error::DimensionMismatch(
            "divergence needs a vector field".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid1(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, n).unwrap()
    }

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn fft_round_trip() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let f = ScalarField::from_fn(g, |p| (p[0] * 7.0).sin() + p[1] * p[1]).unwrap();
        let back = fft_inverse_real(g, fft_forward(g, f.values()));
        for (a, b) in f.values().iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let grad = gradient(&ScalarField::constant(g, 3.5));
        assert!(grad.max_abs() < 1e-14);
    }

    #[test]
    fn derivative_of_sine_is_exact() {
        let g = grid1(64);
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin()).unwrap();
        let expect = ScalarField::from_fn(g, |p| 2.0 * PI * (2.0 * PI * p[0]).cos()).unwrap();
        assert!(max_diff(&partial(&f, 0), &expect) < 1e-12);
    }

    #[test]
    fn shear_flow_is_divergence_free() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let u = VectorField::from_fn(g, |p| [(2.0 * PI * p[1]).sin(), 0.0]).unwrap();
        assert!(divergence(&u).max_abs() < 1e-13);
    }

    #[test]
    fn helmholtz_single_mode() {
        let g = grid1(64);
        let c = 1.0 + 4.0 * PI * PI;
        let f = VectorField::from_fn(g, |p| [c * (2.0 * PI * p[0]).sin(), 0.0]).unwrap();
        let v = helmholtz_solve(&f, 1.0, 1.0).unwrap();
        let expect = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin()).unwrap();
        assert!(max_diff(v.component(0), &expect) < 1e-13);
    }

    #[test]
    fn helmholtz_constant_and_zero() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let f = VectorField::from_fn(g, |_| [3.0, -1.0]).unwrap();
        let v = helmholtz_solve(&f, 0.7, 2.0).unwrap();
        assert_abs_diff_eq!(v.component(0).values()[5], 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(v.component(1).values()[9], -0.5, epsilon = 1e-14);
        let z = helmholtz_solve(&VectorField::zeros(g), 1.0, 1.0).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn helmholtz_rejects_bad_coefficients() {
        let g = grid1(8);
        let f = VectorField::zeros(g);
        assert!(helmholtz_solve(&f, 0.0, 1.0).is_err());
        assert!(helmholtz_solve(&f, 1.0, -1.0).is_err());
    }

    #[test]
    fn inverse_laplacian_divergence_of_cosine() {
        let g = grid1(64);
        let r = VectorField::from_fn(g, |p| [(2.0 * PI * p[0]).cos(), 0.0]).unwrap();
        let out = inv_laplacian_div(&r);
        let expect = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() / (2.0 * PI)).unwrap();
        assert!(max_diff(&out, &expect) < 1e-14);
        let c = VectorField::from_fn(g, |_| [2.0, 0.0]).unwrap();
        assert!(inv_laplacian_div(&c).max_abs() < 1e-15);
    }

    #[test]
    fn inverse_laplacian_satisfies_poisson_in_2d() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let r = VectorField::from_fn(g, |p| {
            [
                (2.0 * PI * (p[0] + 2.0 * p[1])).sin() + 0.3,
                (4.0 * PI * p[0]).cos() * (2.0 * PI * p[1]).sin(),
            ]
        })
        .unwrap();
        let out = inv_laplacian_div(&r);
        assert!(out.mean().abs() < 1e-15);
        assert!(max_diff(&laplacian(&out), &divergence(&r)) < 1e-11);
    }

    #[test]
    fn rank_mismatch_is_reported() {
        let g = grid1(8);
        let s = Field::Scalar(ScalarField::zeros(g));
        let v = Field::Vector(VectorField::zeros(g));
        assert!(spectral_derivative(&s, DerivativeOp::Divergence).is_err());
        assert!(spectral_derivative(&v, DerivativeOp::Gradient).is_err());
        assert!(spectral_derivative(&v, DerivativeOp::Laplacian).is_ok());
    }

    #[test]
    fn spectral_shift_matches_grid_shift() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * (4.0 * PI * p[1]).cos()).unwrap();
        let s = spectral_shift(&f, &[3.0 / 16.0, -2.0 / 16.0]).unwrap();
        assert!(max_diff(&s, &f.grid_shift(3, -2)) < 1e-13);
    }

    #[test]
    fn dealias_keeps_low_modes() {
        let g = grid1(32);
        let low = ScalarField::from_fn(g, |p| (2.0 * PI * 3.0 * p[0]).sin()).unwrap();
        let high = ScalarField::from_fn(g, |p| (2.0 * PI * 14.0 * p[0]).cos()).unwrap();
        assert!(max_diff(&dealias(&low), &low) < 1e-14);
        assert!(dealias(&high).max_abs() < 1e-14);
    }
}
