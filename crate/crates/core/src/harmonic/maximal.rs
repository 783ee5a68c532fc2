//! Localized maximal operator over a dyadic radius ladder.

use crate::error::{Error, Result};
use crate::fields::{PeriodicGrid, ScalarField};
use rayon::prelude::*;

/// Dyadic radii `spacing · 2^k ≤ 1`.
pub fn dyadic_radii(grid: PeriodicGrid) -> Vec<f64> {
    let s = grid.spacing();
    (0..)
        .map(|k| s * (1u64 << k) as f64)
        .take_while(|&r| r <= 1.0 + 1e-12)
        .collect()
}

/// Circular prefix sums of one line of samples.
struct Line {
    prefix: Vec<f64>,
}

impl Line {
    fn new(values: &[f64]) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in values {
            acc += v;
            prefix.push(acc);
        }
        Self { prefix }
    }

    fn total(&self) -> f64 {
        *self.prefix.last().expect("non-empty line")
    }

    /// `Σ_{k=-m}^{m} v[(x + k) mod n]`, counting wrapped samples with multiplicity.
    fn window(&self, x: usize, m: usize) -> f64 {
        let n = self.prefix.len() - 1;
        let count = 2 * m + 1;
        let (laps, rem) = (count / n, count % n);
        let start = (x + n * (m / n + 1) - m) % n;
        let partial = if start + rem <= n {
            self.prefix[start + rem] - self.prefix[start]
        } else {
            (self.total() - self.prefix[start]) + self.prefix[start + rem - n]
        };
        laps as f64 * self.total() + partial
    }
}

/// `Mf(x) = max_r` of the average of `f` over the discrete periodic ball of
/// radius `r`, `r` running over [`dyadic_radii`].
pub fn maximal_op(f: &ScalarField) -> Result<ScalarField> {
    if f.values().iter().any(|&v| v < 0.0) {
        return Err(Error::NegativeInput("maximal_op"));
    }
    let g = f.grid();
    let n = g.n();
    let s = g.spacing();
    let radii: Vec<usize> = dyadic_radii(g).iter().map(|r| (r / s).round() as usize).collect();
    let values = if g.dim() == 1 {
        let line = Line::new(f.values());
        (0..n)
            .map(|x| {
                radii
                    .iter()
                    .map(|&m| line.window(x, m) / (2 * m + 1) as f64)
                    .fold(0.0, f64::max)
            })
            .collect()
    } else {
        let rows: Vec<Line> = f.values().chunks(n).map(Line::new).collect();
        // per radius: row half-widths and sample count
        let stencils: Vec<(usize, Vec<usize>, f64)> = radii
            .iter()
            .map(|&m| {
                let widths: Vec<usize> = (0..=m)
                    .map(|dj| (((m * m - dj * dj) as f64).sqrt() + 1e-9).floor() as usize)
                    .collect();
                let count = (2 * widths[0] + 1) + 2 * widths[1..].iter().map(|w| 2 * w + 1).sum::<usize>();
                (m, widths, count as f64)
            })
            .collect();
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = g.unravel(idx);
                stencils
                    .iter()
                    .map(|(m, widths, count)| {
                        let m = *m as isize;
                        let sum: f64 = (-m..=m)
                            .map(|dj| {
                                let row = (j as isize + dj).rem_euclid(n as isize) as usize;
                                rows[row].window(i, widths[dj.unsigned_abs()])
                            })
                            .sum();
                        sum / count
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    ScalarField::new(g, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_sums_wrap_with_multiplicity() {
        let line = Line::new(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(line.window(0, 1), 4.0 + 1.0 + 2.0);
        assert_eq!(line.window(3, 1), 3.0 + 4.0 + 1.0);
        // 9 samples starting at x - 4 = 0 (mod 4): two laps plus one sample
        assert_eq!(line.window(0, 4), 2.0 * 10.0 + 1.0);
    }

    #[test]
    fn constant_is_fixed() {
        for dim in [1, 2] {
            let g = PeriodicGrid::new(dim, 16).unwrap();
            let m = maximal_op(&ScalarField::constant(g, 2.5)).unwrap();
            assert!(m.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        }
    }

    #[test]
    fn indicator_against_brute_force_ladder() {
        let n = 256;
        let g = PeriodicGrid::new(1, n).unwrap();
        let f = ScalarField::from_fn(g, |p| if p[0] < 0.25 { 1.0 } else { 0.0 }).unwrap();
        let mf = maximal_op(&f).unwrap();
        let x = n / 2;
        let mut best: f64 = 0.0;
        let mut m = 1usize;
        while m <= n {
            let mut acc = 0.0;
            for k in -(m as isize)..=(m as isize) {
                acc += f.values()[(x as isize + k).rem_euclid(n as isize) as usize];
            }
            best = best.max(acc / (2 * m + 1) as f64);
            m *= 2;
        }
        assert!((mf.values()[x] - best).abs() < 1e-14);
        assert!((best - 0.25).abs() < 0.01);
    }

    #[test]
    fn two_dimensional_ball_counts() {
        let g = PeriodicGrid::new(2, 8).unwrap();
        let mut v = vec![0.0; 64];
        v[0] = 1.0;
        let mf = maximal_op(&ScalarField::new(g, v).unwrap()).unwrap();
        // radius one spacing: the 5-point cross
        assert!((mf.values()[0] - 1.0 / 5.0).abs() < 1e-15);
        assert!((mf.values()[1] - 1.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn sublinear_and_rejects_negative() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let a = ScalarField::from_fn(g, |p| (6.0 * p[0]).sin().abs()).unwrap();
        let b = ScalarField::from_fn(g, |p| if p[0] < 0.3 { 1.0 } else { 0.0 }).unwrap();
        let sum = a.axpby(1.0, &b, 1.0).unwrap();
        let (ma, mb, ms) = (maximal_op(&a).unwrap(), maximal_op(&b).unwrap(), maximal_op(&sum).unwrap());
        for k in 0..64 {
            assert!(ms.values()[k] <= ma.values()[k] + mb.values()[k] + 1e-14);
        }
        assert!(maximal_op(&a.map(|v| -v).unwrap()).is_err());
    }
}
