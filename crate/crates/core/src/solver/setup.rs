//! Closed-form inputs: source terms as Fourier modes with time envelopes,
//! and initial densities.

use crate::error::{invalid, Result};
use crate::fields::modes::ModeSum;
use crate::fields::{torus_distance, PeriodicGrid, ScalarField, VectorField};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Time factor multiplying one source term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    Constant,
    /// `sin(ω t + phase)`.
    Sin {
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `exp(−rate t)`.
    Exp { rate: f64 },
    /// `min(t / t1, 1)`.
    Ramp { t1: f64 },
}

impl Envelope {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant => 1.0,
            Envelope::Sin { omega, phase } => (omega * t + phase).sin(),
            Envelope::Exp { rate } => (-rate * t).exp(),
            Envelope::Ramp { t1 } => (t / t1).min(1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Envelope::Constant => true,
            Envelope::Sin { omega, phase } => omega.is_finite() && phase.is_finite(),
            Envelope::Exp { rate } => rate.is_finite(),
            Envelope::Ramp { t1 } => t1 > 0.0 && t1.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("source.envelope", format!("{self:?} has invalid parameters")))
        }
    }
}

/// `envelope(t) (cos·cos(2πk·x) + sin·sin(2πk·x))` in velocity component `component`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm {
    pub component: usize,
    pub k: [i64; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
    #[serde(default)]
    pub envelope: Envelope,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Source {
    #[serde(default)]
    pub terms: Vec<SourceTerm>,
}

impl Source {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Spatially uniform, time-independent source.
    pub fn uniform(value: [f64; 2]) -> Self {
        let terms = value
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(c, &v)| SourceTerm {
                component: c,
                k: [0, 0],
                cos: v,
                sin: 0.0,
                envelope: Envelope::Constant,
            })
            .collect();
        Self { terms }
    }

    pub fn with_term(mut self, term: SourceTerm) -> Self {
        self.terms.push(term);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for t in &self.terms {
            if t.component >= dim {
                return Err(invalid(
                    "source.component",
                    format!("component {} on a {dim}-d grid", t.component),
                ));
            }
            if dim == 1 && t.k[1] != 0 {
                return Err(invalid("source.k", "second wavenumber must be 0 in 1-d"));
            }
            if !(t.cos.is_finite() && t.sin.is_finite()) {
                return Err(invalid("source.cos/sin", "must be finite"));
            }
            t.envelope.validate()?;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    pub fn eval(&self, grid: PeriodicGrid, t: f64) -> Result<VectorField> {
        let mut comps = vec![vec![0.0; grid.len()]; grid.dim()];
        for term in &self.terms {
            let amp = term.envelope.eval(t);
            if amp == 0.0 {
                continue;
            }
            for (idx, v) in comps[term.component].iter_mut().enumerate() {
                let p = grid.point(idx);
                let th = 2.0 * PI * (term.k[0] as f64 * p[0] + term.k[1] as f64 * p[1]);
                *v += amp * (term.cos * th.cos() + term.sin * th.sin());
            }
        }
        VectorField::new(
            comps
                .into_iter()
                .map(|c| ScalarField::new(grid, c))
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

/// Initial density specifications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDensity {
    Constant {
        value: f64,
    },
    /// `base + amplitude · exp(−|x − center|² / (2 width²))`, torus distance.
    Bump {
        base: f64,
        amplitude: f64,
        width: f64,
        #[serde(default = "centre")]
        center: [f64; 2],
    },
    /// `inside` on the box `[lo, hi)` (per axis), `outside` elsewhere.
    Indicator {
        lo: f64,
        hi: f64,
        inside: f64,
        outside: f64,
    },
    Modes(ModeSum),
}

fn centre() -> [f64; 2] {
    [0.5, 0.5]
}

impl InitialDensity {
    pub fn field(&self, grid: PeriodicGrid) -> Result<ScalarField> {
        let d = grid.dim();
        match self {
            InitialDensity::Constant { value } => Ok(ScalarField::constant(grid, *value)),
            InitialDensity::Bump {
                base,
                amplitude,
                width,
                center,
            } => {
                if !(*width > 0.0) {
                    return Err(invalid("initial.width", format!("must be positive, got {width}")));
                }
                ScalarField::from_fn(grid, |p| {
                    let r = torus_distance(&p[..d], &center[..d]);
                    base + amplitude * (-r * r / (2.0 * width * width)).exp()
                })
            }
            InitialDensity::Indicator {
                lo,
                hi,
                inside,
                outside,
            } => ScalarField::from_fn(grid, |p| {
                if p[..d].iter().all(|&x| x >= *lo && x < *hi) {
                    *inside
                } else {
                    *outside
                }
            }),
            InitialDensity::Modes(m) => m.field(grid),
        }
    }
}

/// Advection discretisation for the continuity equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    /// First-order upwind finite volumes.
    #[default]
    Upwind,
    /// Second-order MUSCL reconstruction with the minmod limiter.
    Muscl,
}
