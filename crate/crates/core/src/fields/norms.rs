use super::spectral::{gradient, partial};
use super::{ScalarField, VectorField};
use crate::error::{invalid, Result};

/// Norm selector. Integrals use the grid quadrature (mean of samples; the
/// torus has unit volume).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    Lp(f64),
    Linf,
    /// `sqrt(‖f‖²_{L2} + ‖∇f‖²_{L2})`.
    H1,
}

fn lp_of_magnitudes(mags: impl Iterator<Item = f64>, len: usize, p: f64) -> f64 {
    let s: f64 = mags.map(|m| m.powf(p)).sum();
    (s / len as f64).powf(1.0 / p)
}

fn check_p(kind: Norm) -> Result<()> {
    if let Norm::Lp(p) = kind {
        if !(p >= 1.0) {
            return Err(invalid("p", format!("Lp norms need p >= 1, got {p}")));
        }
    }
    Ok(())
}

pub fn norm(f: &ScalarField, kind: Norm) -> Result<f64> {
    check_p(kind)?;
    Ok(match kind {
        Norm::Lp(p) => lp_of_magnitudes(f.values().iter().map(|v| v.abs()), f.values().len(), p),
        Norm::Linf => f.max_abs(),
        Norm::H1 => {
            let l2 = norm(f, Norm::Lp(2.0))?;
            let g = vector_norm(&gradient(f), Norm::Lp(2.0))?;
            (l2 * l2 + g * g).sqrt()
        }
    })
}

/// Norms of the pointwise Euclidean magnitude; `H1` uses the full Jacobian.
pub fn vector_norm(v: &VectorField, kind: Norm) -> Result<f64> {
    check_p(kind)?;
    Ok(match kind {
        Norm::Lp(_) | Norm::Linf => norm(&v.magnitude(), kind)?,
        Norm::H1 => {
            let l2 = vector_norm(v, Norm::Lp(2.0))?;
            let mut grad_sq = 0.0;
            for comp in v.components() {
                for axis in 0..v.grid().dim() {
                    let d = partial(comp, axis);
                    grad_sq += d.dot(&d)?;
                }
            }
            (l2 * l2 + grad_sq).sqrt()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PeriodicGrid;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_has_norm_abs_c() {
        let g = PeriodicGrid::new(2, 8).unwrap();
        let f = ScalarField::constant(g, -2.5);
        for p in [1.0, 2.0, 3.5] {
            assert_relative_eq!(norm(&f, Norm::Lp(p)).unwrap(), 2.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn sine_norms() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin()).unwrap();
        assert_relative_eq!(norm(&f, Norm::Lp(2.0)).unwrap(), 0.5f64.sqrt(), max_relative = 1e-14);
        let h1 = (0.5 + 2.0 * PI * PI).sqrt();
        assert_relative_eq!(norm(&f, Norm::H1).unwrap(), h1, max_relative = 1e-13);
    }

    #[test]
    fn p_below_one_is_rejected() {
        let g = PeriodicGrid::new(1, 8).unwrap();
        assert!(norm(&ScalarField::zeros(g), Norm::Lp(0.5)).is_err());
    }
}
