//! Continuity substep: conservative finite-volume advection followed by
//! exact Fourier diffusion.

use super::setup::Advection;
use crate::error::{invalid, Error, Result};
use crate::fields::{heat_flow, ScalarField, VectorField};

/// Largest admissible `dt Σ_d max|u_d| / spacing`.
pub const ADVECTION_CFL: f64 = 0.5;

/// Largest `dt` allowed by [`ADVECTION_CFL`] for velocity `u` (`inf` for `u = 0`).
pub fn max_stable_dt(u: &VectorField) -> f64 {
    let s = u.grid().spacing();
    let speed: f64 = u.components().iter().map(|c| c.max_abs()).sum();
    if speed == 0.0 {
        f64::INFINITY
    } else {
        ADVECTION_CFL * s / speed
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// `ρ − dt div(ρu)` with face velocities `(u_i + u_{i+1})/2` and upwinded
/// (optionally MUSCL-reconstructed) face densities.
pub fn advect(rho: &ScalarField, u: &VectorField, dt: f64, scheme: Advection) -> Result<ScalarField> {
    let g = rho.grid();
    if u.grid() != g {
        return Err(Error::GridMismatch);
    }
    let max_dt = max_stable_dt(u);
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            stage: "continuity",
            dt,
            max_dt,
        });
    }
    let s = g.spacing();
    let r = rho.values();
    let mut out = r.to_vec();
    for axis in 0..g.dim() {
        let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
        let uc = u.component(axis).values();
        let slope: Vec<f64> = match scheme {
            Advection::Upwind => vec![0.0; g.len()],
            Advection::Muscl => (0..g.len())
                .map(|k| {
                    let right = r[g.offset(k, di, dj)];
                    let left = r[g.offset(k, -di, -dj)];
                    minmod(r[k] - left, right - r[k])
                })
                .collect(),
        };
        // flux through the face between k and its right neighbour
        let flux: Vec<f64> = (0..g.len())
            .map(|k| {
                let kr = g.offset(k, di, dj);
                let vel = 0.5 * (uc[k] + uc[kr]);
                let left = r[k] + 0.5 * slope[k];
                let right = r[kr] - 0.5 * slope[kr];
                vel.max(0.0) * left + vel.min(0.0) * right
            })
            .collect();
        for (k, o) in out.iter_mut().enumerate() {
            *o -= dt / s * (flux[k] - flux[g.offset(k, -di, -dj)]);
        }
    }
    ScalarField::new(g, out)
}

/// One continuity substep: advection, then `exp(α_k dt Δ)`.
pub fn continuity_step(
    rho: &ScalarField,
    u: &VectorField,
    alpha_k: f64,
    dt: f64,
    scheme: Advection,
) -> Result<ScalarField> {
    if !(alpha_k >= 0.0 && alpha_k.is_finite()) {
        return Err(invalid("alpha_k", format!("must be finite and >= 0, got {alpha_k}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let advected = advect(rho, u, dt, scheme)?;
    if alpha_k == 0.0 {
        Ok(advected)
    } else {
        Ok(heat_flow(&advected, alpha_k * dt))
    }
}

/// Sets negative samples to zero. Returns the clipped field and the removed
/// (negative) mass; fails when that mass exceeds `1e-10 · mass0`.
pub fn clip_negative(rho: ScalarField, mass0: f64) -> Result<(ScalarField, f64)> {
    let g = rho.grid();
    let mut clipped = 0.0;
    let values: Vec<f64> = rho
        .into_values()
        .into_iter()
        .map(|v| {
            if v < 0.0 {
                clipped -= v;
                0.0
            } else {
                v
            }
        })
        .collect();
    let clipped = clipped * g.cell_volume();
    let allowed = 1e-10 * mass0;
    if clipped > allowed {
        return Err(Error::NegativeDensity { clipped, allowed });
    }
    Ok((ScalarField::new(g, values)?, clipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PeriodicGrid;
    use std::f64::consts::PI;

    #[test]
    fn no_flux_no_change() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let rho = ScalarField::from_fn(g, |p| 1.0 + 0.3 * (2.0 * PI * p[0]).sin()).unwrap();
        let out = continuity_step(&rho, &VectorField::zeros(g), 0.0, 0.1, Advection::Upwind).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn exact_heat_decay() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let (a, ak, dt) = (0.2, 0.05, 0.01);
        let rho = ScalarField::from_fn(g, |p| 1.0 + a * (2.0 * PI * p[0]).sin()).unwrap();
        let out = continuity_step(&rho, &VectorField::zeros(g), ak, dt, Advection::Upwind).unwrap();
        let amp = a * (-ak * 4.0 * PI * PI * dt).exp();
        for k in 0..64 {
            let exact = 1.0 + amp * (2.0 * PI * g.point(k)[0]).sin();
            assert!((out.values()[k] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_velocity_shifts_by_whole_cells_at_unit_courant() {
        // Courant number 1 is outside the CFL bound; use 0.5 twice instead and
        // compare with the upwind update computed by hand.
        let g = PeriodicGrid::new(1, 8).unwrap();
        let rho = ScalarField::new(g, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let u = VectorField::from_fn(g, |_| [1.0, 0.0]).unwrap();
        let out = advect(&rho, &u, 0.5 / 8.0, Advection::Upwind).unwrap();
        assert_eq!(out.values()[1], 0.5);
        assert_eq!(out.values()[2], 0.5);
        assert!(matches!(advect(&rho, &u, 1.0 / 8.0, Advection::Upwind), Err(Error::Cfl { .. })));
    }

    #[test]
    fn conservation_and_positivity_in_two_dimensions() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let rho = ScalarField::from_fn(g, |p| if p[0] < 0.3 && p[1] < 0.6 { 2.0 } else { 0.0 }).unwrap();
        let u = VectorField::from_fn(g, |p| [(2.0 * PI * p[1]).sin(), 0.7 * (2.0 * PI * p[0]).cos()]).unwrap();
        let dt = max_stable_dt(&u);
        for scheme in [Advection::Upwind, Advection::Muscl] {
            let mut r = rho.clone();
            for _ in 0..20 {
                r = continuity_step(&r, &u, 0.0, dt, scheme).unwrap();
                assert!(r.min() >= -1e-15, "{scheme:?}: {}", r.min());
            }
            assert!((r.integral() - rho.integral()).abs() < 1e-13);
        }
    }

    #[test]
    fn clipping_policy() {
        let g = PeriodicGrid::new(1, 8).unwrap();
        let mut v = vec![1.0; 8];
        v[1] = -8e-13;
        let (f, c) = clip_negative(ScalarField::new(g, v.clone()).unwrap(), 1.0).unwrap();
        assert_eq!(f.min(), 0.0);
        assert!((c - 1e-13).abs() < 1e-28);
        v[1] = -1e-3;
        assert!(clip_negative(ScalarField::new(g, v).unwrap(), 1.0).is_err());
    }
}
