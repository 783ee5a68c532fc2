//! The averaged-gradient operator
//! `D_h f(x) = (1/h) ∫_{|z|≤h} f(x+z) |z|^{1−d} dz`, applied to `f = |∇u|`.
//!
//! The kernel `L_h(z) = 1_{|z|≤h}/(h|z|^{d−1})` is integrated over each
//! grid cell (periodised), rescaled to its exact mass `κ_1 = 2`,
//! `κ_2 = 2π`, and applied by FFT convolution.

use crate::error::{invalid, Error, Result};
use crate::fields::{circular_convolve, PeriodicGrid, ScalarField};
use crate::quadrature::gauss_legendre;
use std::f64::consts::{PI, SQRT_2};

/// Mass of `L_h` in dimension `d`.
pub fn dh_mass(dim: usize) -> f64 {
    if dim == 1 {
        2.0
    } else {
        2.0 * PI
    }
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// `∫ 1/|z|` over a first-quadrant rectangle intersected with the disk `|z| ≤ h`.
fn quadrant_integral(rect: [f64; 4], h: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    let [x0, x1, y0, y1] = rect;
    if x0.hypot(y0) >= h || x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    if x0 == 0.0 && y0 == 0.0 {
        // square corner at the origin, fully inside the disk (h ≥ spacing)
        debug_assert!(x1.max(y1) * SQRT_2 <= h * (1.0 + 1e-12));
        let c = x1.min(y1);
        let sq = 2.0 * c * (1.0 + SQRT_2).ln();
        // strip beyond the square when the rectangle is not square
        let extra = if x1 > y1 {
            quadrant_integral([c, x1, 0.0, y1], h, nodes)
        } else if y1 > x1 {
            quadrant_integral([0.0, x1, c, y1], h, nodes)
        } else {
            0.0
        };
        return sq + extra;
    }
    // ∫_{y0}^{top(x)} dy/√(x²+y²) = ln((top + √(x²+top²)) / (y0 + √(x²+y0²)))
    let inner = |x: f64| {
        let top = y1.min((h * h - x * x).max(0.0).sqrt());
        if top <= y0 {
            return 0.0;
        }
        ((top + x.hypot(top)) / (y0 + x.hypot(y0))).ln()
    };
    let xe = x1.min((h * h - y0 * y0).max(0.0).sqrt());
    // split where the disk boundary crosses the top edge
    let mut cuts = vec![x0];
    let xk = (h * h - y1 * y1).max(0.0).sqrt();
    if xk > x0 && xk < xe {
        cuts.push(xk);
    }
    cuts.push(xe);
    let (xs, ws) = nodes;
    cuts.windows(2)
        .map(|w| {
            let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            xs.iter().zip(ws).map(|(t, wt)| wt * inner(c + r * t)).sum::<f64>() * r
        })
        .sum()
}

/// Splits a rectangle at the axes and reflects the pieces into the first quadrant.
fn radial_rectangle(rect: [f64; 4], h: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    let split = |a: f64, b: f64| -> Vec<(f64, f64)> {
        if a >= 0.0 {
            vec![(a, b)]
        } else if b <= 0.0 {
            vec![(-b, -a)]
        } else {
            vec![(0.0, -a), (0.0, b)]
        }
    };
    let mut total = 0.0;
    for (xa, xb) in split(rect[0], rect[1]) {
        for (ya, yb) in split(rect[2], rect[3]) {
            total += quadrant_integral([xa, xb, ya, yb], h, nodes);
        }
    }
    total
}

/// Cell integrals of the periodised `L_h`, normalised to mass `κ_d`.
pub fn dh_weights(grid: PeriodicGrid, h: f64) -> Result<Vec<f64>> {
    let s = grid.spacing();
    if !(h.is_finite() && h >= s * (1.0 - 1e-12)) {
        return Err(invalid("h", format!("D_h needs h >= spacing = {s}, got {h}")));
    }
    if h > 1.0 + 1e-12 {
        return Err(invalid("h", format!("D_h needs h <= 1, got {h}")));
    }
    let n = grid.n();
    let mut w = if grid.dim() == 1 {
        (0..n)
            .map(|k| {
                let c = grid.signed_offset(k) as f64 * s;
                (-2..=2)
                    .map(|m| overlap(c - 0.5 * s + m as f64, c + 0.5 * s + m as f64, -h, h))
                    .sum::<f64>()
                    / h
            })
            .collect::<Vec<_>>()
    } else {
        let nodes = gauss_legendre(16);
        (0..grid.len())
            .map(|idx| {
                let (i, j) = grid.unravel(idx);
                let cx = grid.signed_offset(i) as f64 * s;
                let cy = grid.signed_offset(j) as f64 * s;
                let mut acc = 0.0;
                for mx in -1..=1 {
                    for my in -1..=1 {
                        let rect = [
                            cx - 0.5 * s + mx as f64,
                            cx + 0.5 * s + mx as f64,
                            cy - 0.5 * s + my as f64,
                            cy + 0.5 * s + my as f64,
                        ];
                        acc += radial_rectangle(rect, h, &nodes);
                    }
                }
                acc / h
            })
            .collect::<Vec<_>>()
    };
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NonFinite("D_h weights".into()));
    }
    let scale = dh_mass(grid.dim()) / total;
    w.iter_mut().for_each(|v| *v *= scale);
    Ok(w)
}

/// `D_h f` for `f ≥ 0` (normally `f = |∇u|`).
pub fn dh_op(gradmag: &ScalarField, h: f64) -> Result<ScalarField> {
    if gradmag.values().iter().any(|&v| v < 0.0) {
        return Err(Error::NegativeInput("dh_op"));
    }
    let w = dh_weights(gradmag.grid(), h)?;
    circular_convolve(gradmag, &w)?.map(|v| v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_gives_kernel_mass() {
        for dim in [1, 2] {
            let g = PeriodicGrid::new(dim, 32).unwrap();
            for h in [g.spacing(), 0.1, 0.5, 1.0] {
                let d = dh_op(&ScalarField::constant(g, 3.0), h).unwrap();
                for v in d.values() {
                    assert!((v - 3.0 * dh_mass(dim)).abs() < 1e-10, "dim {dim} h {h}: {v}");
                }
            }
        }
    }

    #[test]
    fn one_dimensional_weights_are_exact_indicator_overlaps() {
        let g = PeriodicGrid::new(1, 16).unwrap();
        let w = dh_weights(g, 2.5 / 16.0).unwrap();
        let h = 2.5 / 16.0;
        let s = 1.0 / 16.0;
        assert!((w[0] - s / h).abs() < 1e-14);
        assert!((w[2] - s / h).abs() < 1e-14);
        assert!((w[3] - 0.0).abs() < 1e-14);
        assert!((w[15] - s / h).abs() < 1e-14);
    }

    #[test]
    fn two_dimensional_raw_mass_is_close_to_two_pi() {
        // before rescaling the quadrature should already be accurate
        let g = PeriodicGrid::new(2, 32).unwrap();
        let nodes = gauss_legendre(16);
        let h = 0.2;
        let s = g.spacing();
        let mut total = 0.0;
        for idx in 0..g.len() {
            let (i, j) = g.unravel(idx);
            let cx = g.signed_offset(i) as f64 * s;
            let cy = g.signed_offset(j) as f64 * s;
            total += radial_rectangle([cx - s / 2.0, cx + s / 2.0, cy - s / 2.0, cy + s / 2.0], h, &nodes);
        }
        assert!((total / h - 2.0 * PI).abs() < 1e-4 * 2.0 * PI, "{}", total / h);
    }

    #[test]
    fn rejects_sub_grid_scales_and_negative_input() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        assert!(dh_op(&ScalarField::constant(g, 1.0), 0.01).is_err());
        assert!(dh_op(&ScalarField::constant(g, -1.0), 0.1).is_err());
    }
}
