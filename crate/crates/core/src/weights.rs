//! The damped weight `w`: `∂t w + u·∇w + λ D w = 0`, `w(0) = 1`, with
//! damping `D = M|∇u| + |div u| + ρ^γ`.

use crate::error::{invalid, Error, Result};
use crate::fields::spectral::{fft_forward, modes};
use crate::fields::{divergence, grad_magnitude, ScalarField, VectorField};
use crate::harmonic::maximal_op;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Floor applied to `w` before taking logarithms.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Largest admissible `dt max|u_d| / spacing` for [`weight_step`].
pub const WEIGHT_CFL: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DampingField {
    pub values: ScalarField,
    pub maximal_part: ScalarField,
    pub div_part: ScalarField,
    pub pressure_part: ScalarField,
}

pub fn damping_field(u: &VectorField, rho: &ScalarField, gamma: f64) -> Result<DampingField> {
    if u.grid() != rho.grid() {
        return Err(Error::GridMismatch);
    }
    let maximal_part = maximal_op(&grad_magnitude(u))?;
    let div_part = divergence(u).map(f64::abs)?;
    let pressure_part = rho.map(|r| r.max(0.0).powf(gamma))?;
    let values = maximal_part
        .axpby(1.0, &div_part, 1.0)?
        .axpby(1.0, &pressure_part, 1.0)?;
    Ok(DampingField {
        values,
        maximal_part,
        div_part,
        pressure_part,
    })
}

/// Interpolation used at characteristic feet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Linear (1-d) / bilinear (2-d); monotone.
    #[default]
    Linear,
    /// Catmull–Rom cubic per axis, clamped to the two bracketing samples.
    ClampedCubic,
    /// Trigonometric interpolant (exact translation of band-limited data);
    /// cost `O(N²)` per step, meant for small grids and verification.
    Spectral,
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let v = 0.5
        * (2.0 * p[1]
            + (p[2] - p[0]) * t
            + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t * t
            + (3.0 * (p[1] - p[2]) + p[3] - p[0]) * t * t * t);
    let (lo, hi) = if p[1] <= p[2] { (p[1], p[2]) } else { (p[2], p[1]) };
    v.clamp(lo, hi)
}

/// One-axis interpolation of a periodic line at fractional index `x`.
fn interp_line(line: impl Fn(isize) -> f64, x: f64, kind: Interpolation) -> f64 {
    let i = x.floor();
    let t = x - i;
    let i = i as isize;
    match kind {
        Interpolation::ClampedCubic => catmull_rom([line(i - 1), line(i), line(i + 1), line(i + 2)], t),
        _ => (1.0 - t) * line(i) + t * line(i + 1),
    }
}

struct TrigInterpolant {
    n: usize,
    dim: usize,
    coeffs: Vec<(f64, f64, f64, f64)>,
}

impl TrigInterpolant {
    fn new(w: &ScalarField) -> Self {
        let g = w.grid();
        let spec = fft_forward(g, w.values());
        let scale = 1.0 / g.len() as f64;
        let coeffs = spec
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(idx, c)| {
                let xi = modes(g, idx);
                (xi[0] as f64, xi[1] as f64, c.re * scale, c.im * scale)
            })
            .collect();
        Self {
            n: g.n(),
            dim: g.dim(),
            coeffs,
        }
    }

    /// Real trigonometric interpolant; Nyquist modes contribute cosines only.
    fn eval(&self, x: [f64; 2]) -> f64 {
        let half = (self.n / 2) as f64;
        self.coeffs
            .iter()
            .map(|&(kx, ky, re, im)| {
                let th = 2.0 * PI * (kx * x[0] + ky * x[1]);
                let nyq = kx == -half || (self.dim == 2 && ky == -half);
                if nyq {
                    re * th.cos()
                } else {
                    re * th.cos() - im * th.sin()
                }
            })
            .sum()
    }
}

/// Semi-Lagrangian step: `w_new(x) = w(x − u(x) dt) · exp(−λ D(x) dt)`,
/// clamped to `[0, 1]`.
pub fn weight_step(
    w: &ScalarField,
    u: &VectorField,
    damping: &DampingField,
    lambda: f64,
    dt: f64,
    kind: Interpolation,
) -> Result<ScalarField> {
    let g = w.grid();
    if u.grid() != g || damping.values.grid() != g {
        return Err(Error::GridMismatch);
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let s = g.spacing();
    let umax = u.components().iter().map(|c| c.max_abs()).fold(0.0, f64::max);
    if dt * umax / s > WEIGHT_CFL {
        return Err(Error::Cfl {
            stage: "weight transport",
            dt,
            max_dt: WEIGHT_CFL * s / umax,
        });
    }
    let n = g.n() as isize;
    let wv = w.values();
    let at = |i: isize, j: isize| wv[g.ravel(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize)];
    let trig = (kind == Interpolation::Spectral).then(|| TrigInterpolant::new(w));
    let values = (0..g.len())
        .map(|idx| {
            let (i, j) = g.unravel(idx);
            let fx = i as f64 - u.component(0).values()[idx] * dt / s;
            let fy = if g.dim() == 2 {
                j as f64 - u.component(1).values()[idx] * dt / s
            } else {
                0.0
            };
            let transported = if let Some(t) = &trig {
                t.eval([fx * s, fy * s])
            } else if g.dim() == 1 {
                interp_line(|k| at(k, 0), fx, kind)
            } else {
                let jy = fy.floor();
                let ty = fy - jy;
                let jy = jy as isize;
                let row = |jj: isize| interp_line(|k| at(k, jj), fx, kind);
                match kind {
                    Interpolation::ClampedCubic => {
                        catmull_rom([row(jy - 1), row(jy), row(jy + 1), row(jy + 2)], ty)
                    }
                    _ => (1.0 - ty) * row(jy) + ty * row(jy + 1),
                }
            };
            let damp = (-lambda * damping.values.values()[idx] * dt).exp();
            (transported * damp).clamp(0.0, 1.0)
        })
        .collect();
    ScalarField::new(g, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightBudget {
    /// `∫ ρ |log w|`.
    pub value: f64,
    /// Grid points where `w` was below [`WEIGHT_FLOOR`].
    pub floored: usize,
}

pub fn log_weight_budget(rho: &ScalarField, w: &ScalarField) -> Result<WeightBudget> {
    if rho.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    if w.min() < 0.0 {
        return Err(Error::NegativeInput("log_weight_budget"));
    }
    let mut floored = 0;
    let sum: f64 = rho
        .values()
        .iter()
        .zip(w.values())
        .map(|(&r, &wv)| {
            if wv < WEIGHT_FLOOR {
                floored += 1;
            }
            r * wv.max(WEIGHT_FLOOR).ln().abs()
        })
        .sum();
    Ok(WeightBudget {
        value: sum * rho.grid().cell_volume(),
        floored,
    })
}

/// Default damping strength `λ = 2(C_fit + 1)`.
pub fn default_lambda(c_fit: f64) -> f64 {
    2.0 * (c_fit + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PeriodicGrid;

    fn g1(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, n).unwrap()
    }

    #[test]
    fn damping_parts() {
        let g = g1(64);
        let d = damping_field(&VectorField::zeros(g), &ScalarField::zeros(g), 2.0).unwrap();
        assert_eq!(d.values.max_abs(), 0.0);
        let d = damping_field(&VectorField::zeros(g), &ScalarField::constant(g, 2.0), 2.0).unwrap();
        assert!(d.values.values().iter().all(|&v| (v - 4.0).abs() < 1e-14));
        let u = VectorField::from_fn(g, |p| [(2.0 * PI * p[0]).sin(), 0.0]).unwrap();
        let d = damping_field(&u, &ScalarField::zeros(g), 2.0).unwrap();
        // at x = 0: M|u'| ≥ |u'(0)| − small, plus |div u| = 2π
        assert!(d.values.values()[0] >= 4.0 * PI - 0.05, "{}", d.values.values()[0]);
    }

    #[test]
    fn pure_damping_is_exact() {
        let g = g1(32);
        let d = damping_field(&VectorField::zeros(g), &ScalarField::constant(g, 1.5), 2.0).unwrap();
        let mut w = ScalarField::constant(g, 1.0);
        let (lambda, dt) = (0.7, 0.01);
        for _ in 0..50 {
            w = weight_step(&w, &VectorField::zeros(g), &d, lambda, dt, Interpolation::Linear).unwrap();
        }
        let exact = (-lambda * 2.25 * 50.0 * dt).exp();
        assert!(w.values().iter().all(|&v| (v - exact).abs() < 1e-14 * exact));
    }

    #[test]
    fn zero_lambda_and_velocity_is_identity() {
        let g = g1(32);
        let w = ScalarField::from_fn(g, |p| 0.5 + 0.3 * (2.0 * PI * p[0]).cos()).unwrap();
        let d = damping_field(&VectorField::zeros(g), &ScalarField::constant(g, 1.0), 2.0).unwrap();
        for kind in [Interpolation::Linear, Interpolation::ClampedCubic, Interpolation::Spectral] {
            let out = weight_step(&w, &VectorField::zeros(g), &d, 0.0, 0.1, kind).unwrap();
            for (a, b) in out.values().iter().zip(w.values()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spectral_interpolation_translates_single_modes() {
        for dim in [1, 2] {
            let g = PeriodicGrid::new(dim, 16).unwrap();
            let w = ScalarField::from_fn(g, |p| 0.5 + 0.25 * (2.0 * PI * (p[0] + 2.0 * p[1])).sin()).unwrap();
            let (ux, uy, dt) = (0.3, -0.2, 0.1);
            let u = VectorField::from_fn(g, |_| [ux, uy]).unwrap();
            let d = damping_field(&VectorField::zeros(g), &ScalarField::zeros(g), 2.0).unwrap();
            let out = weight_step(&w, &u, &d, 1.0, dt, Interpolation::Spectral).unwrap();
            let uy = if dim == 2 { uy } else { 0.0 };
            for k in 0..g.len() {
                let p = g.point(k);
                let exact = 0.5 + 0.25 * (2.0 * PI * ((p[0] - ux * dt) + 2.0 * (p[1] - uy * dt))).sin();
                assert!((out.values()[k] - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn maximum_principle_and_monotonicity_in_lambda() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let w = ScalarField::from_fn(g, |p| if p[0] < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let u = VectorField::from_fn(g, |p| [0.8 * (2.0 * PI * p[1]).sin(), 0.5]).unwrap();
        let d = damping_field(&u, &ScalarField::constant(g, 0.5), 2.0).unwrap();
        for kind in [Interpolation::Linear, Interpolation::ClampedCubic] {
            let a = weight_step(&w, &u, &d, 0.5, 0.05, kind).unwrap();
            let b = weight_step(&w, &u, &d, 2.0, 0.05, kind).unwrap();
            assert!(a.min() >= 0.0 && a.max() <= 1.0);
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| y <= x));
        }
        assert!(matches!(
            weight_step(&w, &u, &d, 1.0, 1.0, Interpolation::Linear),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn budget_values() {
        let g = g1(16);
        let one = ScalarField::constant(g, 1.0);
        assert_eq!(log_weight_budget(&one, &one).unwrap().value, 0.0);
        let b = log_weight_budget(&one, &ScalarField::constant(g, (-1.0f64).exp())).unwrap();
        assert!((b.value - 1.0).abs() < 1e-15);
        let b = log_weight_budget(&one, &ScalarField::zeros(g)).unwrap();
        assert_eq!(b.floored, 16);
        assert!(b.value.is_finite());
    }
}
