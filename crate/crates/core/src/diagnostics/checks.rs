//! Pointwise pressure-commutator bound and the extra-integrability identity.

use crate::error::{invalid, Error, Result};
use crate::fields::{divergence, inv_laplacian_div, ScalarField};
use crate::pressure::{Barotropic, PressureLaw};
use crate::solver::{pressure_field, Observer, SimConfig, SimState, StepReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `C = max(3, 2^{γ−1}) (C_fit + P̄_fit + 1)`.
pub fn commutator_constant(law: &PressureLaw) -> Result<f64> {
    let f = law.fitted().ok_or_else(|| Error::UnvalidatedLaw(law.label()))?;
    if !(f.c.is_finite() && f.pbar.is_finite()) {
        return Err(Error::UnvalidatedLaw(law.label()));
    }
    Ok(3f64.max(2f64.powf(law.gamma() - 1.0)) * (f.c + f.pbar + 1.0))
}

/// Where the density pairs come from.
#[derive(Clone, Copy, Debug)]
pub enum PairSource<'a> {
    /// Independent uniform draws in `(0, rho_max]²`.
    Uniform { count: usize, rho_max: f64, seed: u64 },
    /// Values of a density field at uniformly drawn grid points.
    Field { rho: &'a ScalarField, count: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    /// `max [−C(1 + a^γ)|a − b| − (P(a) − P(b)) a sign(a − b)]` (≤ 0 when the bound holds).
    pub max_violation: f64,
    pub c_used: f64,
    pub pairs: usize,
}

pub fn commutator_bound_check(law: &PressureLaw, source: PairSource<'_>) -> Result<CommutatorReport> {
    let c = commutator_constant(law)?;
    let gamma = law.gamma();
    let check = |a: f64, b: f64| {
        let lhs = (law.pressure(a) - law.pressure(b)) * a * (a - b).signum();
        let lhs = if a == b { 0.0 } else { lhs };
        -c * (1.0 + a.powf(gamma)) * (a - b).abs() - lhs
    };
    let mut worst = f64::NEG_INFINITY;
    let pairs = match source {
        PairSource::Uniform { count, rho_max, seed } => {
            if !(rho_max > 0.0 && rho_max.is_finite()) {
                return Err(invalid("rho_max", format!("must be positive, got {rho_max}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                // 1 − U ∈ (0, 1]
                let a = rho_max * (1.0 - rng.random::<f64>());
                let b = rho_max * (1.0 - rng.random::<f64>());
                worst = worst.max(check(a, b));
            }
            count
        }
        PairSource::Field { rho, count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rho.values().len();
            for _ in 0..count {
                let a = rho.values()[rng.random_range(0..n)].max(0.0);
                let b = rho.values()[rng.random_range(0..n)].max(0.0);
                worst = worst.max(check(a, b));
            }
            count
        }
    };
    Ok(CommutatorReport {
        max_violation: if pairs == 0 { 0.0 } else { worst },
        c_used: c,
        pairs,
    })
}

/// Time integrals behind the extra-integrability estimate, as left Riemann
/// sums over the observed states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtraIntegrabilityReport {
    pub theta: f64,
    pub t: f64,
    /// `∫∫ ρ^{γ+θ}`.
    pub power: f64,
    /// `∫∫ ρ^{2θ}`, the right-hand side scale of the a-priori bound.
    pub power_2theta: f64,
    /// `I` from `∫∫ P(ρ) ρ^θ`.
    pub direct: f64,
    /// `I` from `μ∫∫ div u ρ^θ + ∫∫ Δ⁻¹div R ρ^θ + ∫∫ P̄ ρ^θ`, `R = S − αu`.
    pub decomposed: f64,
}

impl ExtraIntegrabilityReport {
    pub fn mismatch(&self) -> f64 {
        let scale = self.direct.abs().max(self.decomposed.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.direct - self.decomposed).abs() / scale
        }
    }
}

/// Integrands of one state: `(ρ^{γ+θ}, ρ^{2θ}, P ρ^θ, decomposition)`.
fn integrands(cfg: &SimConfig, state: &SimState, theta: f64) -> Result<[f64; 4]> {
    let g = state.rho.grid();
    let s = cfg.source.eval(g, state.t)?;
    let p = pressure_field(&state.rho, &cfg.law, cfg.dealias_pressure)?;
    let pbar = p.mean();
    let r = s.axpby(1.0, &state.u, -cfg.alpha)?;
    let lap = inv_laplacian_div(&r);
    let div = divergence(&state.u);
    let gamma = cfg.law.gamma();
    let mut acc = [0.0; 4];
    for k in 0..g.len() {
        let rho = state.rho.values()[k].max(0.0);
        let rt = rho.powf(theta);
        acc[0] += rho.powf(gamma + theta);
        acc[1] += rho.powf(2.0 * theta);
        acc[2] += p.values()[k] * rt;
        acc[3] += (cfg.mu * div.values()[k] + lap.values()[k] + pbar) * rt;
    }
    Ok(acc.map(|a| a * g.cell_volume()))
}

/// Observer accumulating [`ExtraIntegrabilityReport`].
#[derive(Clone, Debug)]
pub struct ExtraIntegrability {
    report: ExtraIntegrabilityReport,
    pending: Option<(f64, [f64; 4])>,
}

impl ExtraIntegrability {
    pub fn new(theta: f64, gamma: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= gamma) {
            return Err(invalid("theta", format!("must lie in (0, gamma = {gamma}], got {theta}")));
        }
        Ok(Self {
            report: ExtraIntegrabilityReport {
                theta,
                ..Default::default()
            },
            pending: None,
        })
    }

    pub fn report(&self) -> ExtraIntegrabilityReport {
        self.report
    }

    pub fn push(&mut self, cfg: &SimConfig, state: &SimState) -> Result<()> {
        let now = integrands(cfg, state, self.report.theta)?;
        if let Some((t0, prev)) = self.pending {
            let dt = state.t - t0;
            self.report.power += dt * prev[0];
            self.report.power_2theta += dt * prev[1];
            self.report.direct += dt * prev[2];
            self.report.decomposed += dt * prev[3];
        }
        self.report.t = state.t;
        self.pending = Some((state.t, now));
        Ok(())
    }
}

impl Observer for ExtraIntegrability {
    fn observe(&mut self, cfg: &SimConfig, state: &SimState, _: &StepReport) -> Result<()> {
        self.push(cfg, state)
    }
}

/// [`ExtraIntegrability`] over a stored trajectory (ordered in time).
pub fn extra_integrability(cfg: &SimConfig, trajectory: &[SimState], theta: f64) -> Result<ExtraIntegrabilityReport> {
    let mut acc = ExtraIntegrability::new(theta, cfg.law.gamma())?;
    for s in trajectory {
        acc.push(cfg, s)?;
    }
    Ok(acc.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PeriodicGrid;
    use crate::solver::{run_simulation, scenarios};

    #[test]
    fn commutator_trivial_cases() {
        let law = PressureLaw::gamma_law(2.0).unwrap();
        let r = commutator_bound_check(&law, PairSource::Uniform { count: 1000, rho_max: 10.0, seed: 1 }).unwrap();
        assert!(r.max_violation <= 0.0);
        assert_eq!(r.c_used, 12.0);
        let g = PeriodicGrid::new(1, 16).unwrap();
        let c = ScalarField::constant(g, 1.3);
        let r = commutator_bound_check(&law, PairSource::Field { rho: &c, count: 50, seed: 2 }).unwrap();
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn commutator_requires_validation() {
        let table = crate::pressure::PiecewisePolynomial::new(vec![0.0], vec![vec![0.0, 0.0, 1.0]]).unwrap();
        let law = PressureLaw::piecewise(2.0, "custom", table).unwrap();
        assert!(matches!(
            commutator_bound_check(&law, PairSource::Uniform { count: 1, rho_max: 1.0, seed: 0 }),
            Err(Error::UnvalidatedLaw(_))
        ));
    }

    #[test]
    fn stationary_power_integral() {
        let g = PeriodicGrid::new(1, 16).unwrap();
        let mut cfg = scenarios::stationary(g, 1.5, PressureLaw::gamma_law(2.0).unwrap()).unwrap();
        cfg.dt = 0.01;
        cfg.t_end = 0.3;
        let mut acc = ExtraIntegrability::new(1.0, 2.0).unwrap();
        run_simulation(&cfg, &mut acc).unwrap();
        let r = acc.report();
        assert!((r.power - 0.3 * 1.5f64.powi(3)).abs() < 1e-12);
        assert!(r.mismatch() < 1e-12);
        assert!(ExtraIntegrability::new(3.0, 2.0).is_err());
    }
}
