//! Operator-split time integration of
//! `∂tρ + div(ρu) = α_k Δρ`, `−μΔu + αu + ∇P(ρ) = S`, together with the
//! damped weight and discrete energy bookkeeping.
//!
//! Each step: the velocity `u^n` solves the momentum equation for `(ρ^n, S(t_n))`;
//! `ρ^{n+1}` comes from an upwind finite-volume step plus exact diffusion;
//! `w^{n+1}` from a semi-Lagrangian step damped by `D(u^n, ρ^n)`.

pub mod scenarios;
mod setup;
mod transport;

pub use setup::{Advection, Envelope, InitialDensity, Source, SourceTerm};
pub use transport::{advect, clip_negative, continuity_step, max_stable_dt, ADVECTION_CFL};

use crate::error::{invalid, Error, Result};
use crate::fields::{
    dealias, divergence, grad_magnitude, gradient, helmholtz_apply, helmholtz_solve, inv_laplacian_div, norm,
    vector_norm, Norm, PeriodicGrid, ScalarField, VectorField,
};
use crate::harmonic::KernelSpec;
use crate::pressure::{internal_energy, Barotropic, Law};
use crate::weights::{damping_field, default_lambda, log_weight_budget, weight_step, Interpolation, WeightBudget};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub mu: f64,
    pub alpha: f64,
    pub law: Law,
    /// Artificial viscosity `α_k ≥ 0`.
    pub alpha_k: f64,
    pub dt: f64,
    pub t_end: f64,
    pub source: Source,
    pub rho0: ScalarField,
    /// Weight damping `λ ≥ 0`.
    pub lambda_w: f64,
    /// Kernels handed to diagnostics observers.
    pub kernels: Vec<KernelSpec>,
    /// Reference density `ρ*` of the internal energy.
    pub rho_ref: f64,
    pub advection: Advection,
    pub interpolation: Interpolation,
    /// Apply the 2/3 rule to `P(ρ)` before differentiating it.
    pub dealias_pressure: bool,
    /// Blow-up cap on `max ρ`.
    pub rho_cap: f64,
    /// Emit every `emit_every` steps (the initial and final states are always emitted).
    pub emit_every: usize,
}

impl SimConfig {
    /// Defaults: `μ = α = 1`, `α_k = 0`, `dt = 1e-3`, `t_end = 0.1`, `S = 0`,
    /// `λ = 2(C_fit + 1)`, `ρ* = 1`, upwind advection, linear interpolation.
    pub fn new(rho0: ScalarField, law: impl Into<Law>) -> Self {
        let law = law.into();
        let c_fit = law.base().fitted().map(|f| f.c).unwrap_or(1.0);
        Self {
            mu: 1.0,
            alpha: 1.0,
            law,
            alpha_k: 0.0,
            dt: 1e-3,
            t_end: 0.1,
            source: Source::zero(),
            rho0,
            lambda_w: default_lambda(c_fit),
            kernels: Vec::new(),
            rho_ref: 1.0,
            advection: Advection::Upwind,
            interpolation: Interpolation::Linear,
            dealias_pressure: false,
            rho_cap: 1e6,
            emit_every: 1,
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.rho0.grid()
    }

    pub fn mass0(&self) -> f64 {
        self.rho0.integral()
    }

    /// Number of steps; the last one is shortened to land on `t_end`.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("alpha", self.alpha)?;
        positive("dt", self.dt)?;
        positive("rho_ref", self.rho_ref)?;
        positive("rho_cap", self.rho_cap)?;
        if !(self.alpha_k >= 0.0 && self.alpha_k.is_finite()) {
            return Err(invalid("alpha_k", format!("must be finite and >= 0, got {}", self.alpha_k)));
        }
        if !(self.lambda_w >= 0.0 && self.lambda_w.is_finite()) {
            return Err(invalid("lambda_w", format!("must be finite and >= 0, got {}", self.lambda_w)));
        }
        if !(self.t_end >= self.dt) {
            return Err(invalid("t_end", format!("must be >= dt, got {}", self.t_end)));
        }
        if self.emit_every == 0 {
            return Err(invalid("emit_every", "must be at least 1"));
        }
        if self.rho0.min() < 0.0 {
            return Err(invalid("rho0", "must be >= 0 pointwise"));
        }
        if !(self.mass0() > 0.0) {
            return Err(invalid("rho0", "must have positive mass"));
        }
        for k in &self.kernels {
            k.validate(self.grid().dim())?;
        }
        self.source.validate(self.grid().dim())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub rho: ScalarField,
    pub u: VectorField,
    pub w: ScalarField,
    pub step_index: usize,
}

/// `P(ρ)` sampled pointwise (negative samples read as 0), optionally dealiased.
pub fn pressure_field(rho: &ScalarField, law: &dyn Barotropic, dealiased: bool) -> Result<ScalarField> {
    let p = rho.map(|r| law.pressure(r.max(0.0)))?;
    if p.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("pressure {}", law.label())));
    }
    Ok(if dealiased { dealias(&p) } else { p })
}

/// `u = (−μΔ + α)⁻¹ (S − ∇P(ρ))`.
pub fn solve_velocity(
    rho: &ScalarField,
    s: &VectorField,
    mu: f64,
    alpha: f64,
    law: &dyn Barotropic,
) -> Result<VectorField> {
    solve_velocity_with(rho, s, mu, alpha, law, false)
}

pub fn solve_velocity_with(
    rho: &ScalarField,
    s: &VectorField,
    mu: f64,
    alpha: f64,
    law: &dyn Barotropic,
    dealiased: bool,
) -> Result<VectorField> {
    if rho.grid() != s.grid() {
        return Err(Error::GridMismatch);
    }
    let p = pressure_field(rho, law, dealiased)?;
    helmholtz_solve(&s.axpby(1.0, &gradient(&p), -1.0)?, mu, alpha)
}

/// `‖−μΔu + αu + ∇P(ρ) − S‖_{L2}`.
pub fn momentum_residual(
    rho: &ScalarField,
    u: &VectorField,
    s: &VectorField,
    cfg: &SimConfig,
) -> Result<f64> {
    let p = pressure_field(rho, &cfg.law, cfg.dealias_pressure)?;
    let r = helmholtz_apply(u, cfg.mu, cfg.alpha)?
        .axpby(1.0, &gradient(&p), 1.0)?
        .axpby(1.0, s, -1.0)?;
    vector_norm(&r, Norm::Lp(2.0))
}

/// `‖div u − (P − P̄)/μ + Δ⁻¹div(S − αu)/μ‖_{L2}`.
pub fn div_identity_residual(
    rho: &ScalarField,
    u: &VectorField,
    s: &VectorField,
    cfg: &SimConfig,
) -> Result<f64> {
    let p = pressure_field(rho, &cfg.law, cfg.dealias_pressure)?;
    let pbar = p.mean();
    let r = s.axpby(1.0, u, -cfg.alpha)?;
    let g = inv_laplacian_div(&r);
    let du = divergence(u);
    let mu = cfg.mu;
    let vals: Vec<f64> = (0..du.values().len())
        .map(|k| du.values()[k] - (p.values()[k] - pbar) / mu + g.values()[k] / mu)
        .collect();
    norm(&ScalarField::new(rho.grid(), vals)?, Norm::Lp(2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `∫ ρ e(ρ)`.
    pub energy: f64,
    /// `∫ μ|∇u|² + α|u|²`.
    pub dissipation_rate: f64,
}

/// `∫ ρ e(ρ)` with `e(ρ) = ∫_{ρ*}^{ρ} P(s)/s² ds`.
pub fn internal_energy_integral(rho: &ScalarField, law: &dyn Barotropic, rho_ref: f64) -> Result<f64> {
    let parts = rho
        .values()
        .par_iter()
        .map(|&r| {
            if r <= 0.0 {
                Ok(0.0)
            } else {
                Ok(r * internal_energy(law, r, rho_ref)?)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>() * rho.grid().cell_volume())
}

pub fn energy_functional(state: &SimState, cfg: &SimConfig) -> Result<EnergyReport> {
    let energy = internal_energy_integral(&state.rho, &cfg.law, cfg.rho_ref)?;
    Ok(EnergyReport {
        energy,
        dissipation_rate: dissipation_rate(&state.u, cfg.mu, cfg.alpha),
    })
}

pub fn dissipation_rate(u: &VectorField, mu: f64, alpha: f64) -> f64 {
    let g2: f64 = grad_magnitude(u).values().iter().map(|v| v * v).sum::<f64>();
    let u2: f64 = u
        .components()
        .iter()
        .flat_map(|c| c.values().iter())
        .map(|v| v * v)
        .sum::<f64>();
    (mu * g2 + alpha * u2) * u.grid().cell_volume()
}

/// `−α_k ∫ P'(ρ)|∇ρ|²/ρ`: the energy exchanged by the artificial viscosity
/// (non-positive for monotone laws).
pub fn viscous_exchange(rho: &ScalarField, law: &dyn Barotropic, alpha_k: f64) -> f64 {
    if alpha_k == 0.0 {
        return 0.0;
    }
    let gm = gradient(rho).magnitude();
    let sum: f64 = rho
        .values()
        .iter()
        .zip(gm.values())
        .filter(|(&r, _)| r > 1e-12)
        .map(|(&r, &gr)| law.derivative(r) * gr * gr / r)
        .sum();
    -alpha_k * sum * rho.grid().cell_volume()
}

/// Scalars computed at every emitted state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub t: f64,
    pub step: usize,
    pub mass: f64,
    /// `|mass − M₀| / M₀`.
    pub mass_error: f64,
    pub energy: f64,
    pub dissipation: f64,
    /// `Σ dt ∫ μ|∇u|² + α|u|²` (left sums).
    pub dissipation_acc: f64,
    /// `Σ dt ⟨S, u⟩`.
    pub source_work_acc: f64,
    /// `Σ dt (−α_k ∫ P'(ρ)|∇ρ|²/ρ)`.
    pub viscous_exchange_acc: f64,
    /// `E + Σ dt·dissipation − E₀ − Σ dt⟨S,u⟩ − Σ dt·exchange` (≤ 0 when the inequality holds).
    pub energy_gap: f64,
    pub momentum_residual: f64,
    pub source_norm: f64,
    pub div_identity_residual: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub weight_budget: WeightBudget,
    /// Total negative mass removed by clipping so far.
    pub clipped_mass: f64,
    pub rho_max: f64,
}

/// Receives every emitted state.
pub trait Observer {
    fn observe(&mut self, cfg: &SimConfig, state: &SimState, report: &StepReport) -> Result<()>;
}

impl Observer for () {
    fn observe(&mut self, _: &SimConfig, _: &SimState, _: &StepReport) -> Result<()> {
        Ok(())
    }
}

impl<F> Observer for F
where
    F: FnMut(&SimConfig, &SimState, &StepReport) -> Result<()>,
{
    fn observe(&mut self, cfg: &SimConfig, state: &SimState, report: &StepReport) -> Result<()> {
        self(cfg, state, report)
    }
}

/// Stores every emitted report.
#[derive(Clone, Debug, Default)]
pub struct ReportLog {
    pub reports: Vec<StepReport>,
}

impl Observer for ReportLog {
    fn observe(&mut self, _: &SimConfig, _: &SimState, report: &StepReport) -> Result<()> {
        self.reports.push(report.clone());
        Ok(())
    }
}

/// Combines two observers.
pub struct Both<'a, A: Observer + ?Sized, B: Observer + ?Sized>(pub &'a mut A, pub &'a mut B);

impl<A: Observer + ?Sized, B: Observer + ?Sized> Observer for Both<'_, A, B> {
    fn observe(&mut self, cfg: &SimConfig, state: &SimState, report: &StepReport) -> Result<()> {
        self.0.observe(cfg, state, report)?;
        self.1.observe(cfg, state, report)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub final_state: SimState,
    pub final_report: StepReport,
    pub steps: usize,
}

/// Running left Riemann sums of the energy balance.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    mass0: f64,
    energy0: f64,
    diss: f64,
    work: f64,
    exchange: f64,
    clipped: f64,
}

impl EnergyLedger {
    pub fn start(cfg: &SimConfig) -> Result<Self> {
        Ok(Self {
            mass0: cfg.mass0(),
            energy0: internal_energy_integral(&cfg.rho0, &cfg.law, cfg.rho_ref)?,
            diss: 0.0,
            work: 0.0,
            exchange: 0.0,
            clipped: 0.0,
        })
    }

    /// Adds one interval of length `dt` starting at `state` (with source `s`).
    pub fn accumulate(&mut self, cfg: &SimConfig, state: &SimState, s: &VectorField, dt: f64) -> Result<()> {
        self.diss += dt * dissipation_rate(&state.u, cfg.mu, cfg.alpha);
        self.work += dt * s.dot(&state.u)?;
        self.exchange += dt * viscous_exchange(&state.rho, &cfg.law, cfg.alpha_k);
        Ok(())
    }
}

/// Report of `state` against the sums in `ledger`; `s` is the source at `state.t`.
pub fn step_report(cfg: &SimConfig, state: &SimState, s: &VectorField, ledger: &EnergyLedger) -> Result<StepReport> {
    let mass = state.rho.integral();
    let e = energy_functional(state, cfg)?;
    let report = StepReport {
        t: state.t,
        step: state.step_index,
        mass,
        mass_error: (mass - ledger.mass0).abs() / ledger.mass0,
        energy: e.energy,
        dissipation: e.dissipation_rate,
        dissipation_acc: ledger.diss,
        source_work_acc: ledger.work,
        viscous_exchange_acc: ledger.exchange,
        energy_gap: e.energy + ledger.diss - ledger.energy0 - ledger.work - ledger.exchange,
        momentum_residual: momentum_residual(&state.rho, &state.u, s, cfg)?,
        source_norm: vector_norm(s, Norm::Lp(2.0))?,
        div_identity_residual: div_identity_residual(&state.rho, &state.u, s, cfg)?,
        w_min: state.w.min(),
        w_max: state.w.max(),
        weight_budget: log_weight_budget(&state.rho, &state.w)?,
        clipped_mass: ledger.clipped,
        rho_max: state.rho.max(),
    };
    let finite = [
        report.mass,
        report.energy,
        report.dissipation,
        report.momentum_residual,
        report.div_identity_residual,
    ];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("diagnostics at t = {}", state.t)));
    }
    Ok(report)
}

/// Initial state: `ρ₀`, `w ≡ 1`, and the matching velocity.
pub fn initial_state(cfg: &SimConfig) -> Result<SimState> {
    let g = cfg.grid();
    let s = cfg.source.eval(g, 0.0)?;
    Ok(SimState {
        t: 0.0,
        u: solve_velocity_with(&cfg.rho0, &s, cfg.mu, cfg.alpha, &cfg.law, cfg.dealias_pressure)?,
        rho: cfg.rho0.clone(),
        w: ScalarField::constant(g, 1.0),
        step_index: 0,
    })
}

/// Runs `cfg` to `t_end`, handing each emitted state to `observer`.
pub fn run_simulation(cfg: &SimConfig, observer: &mut dyn Observer) -> Result<RunOutcome> {
    cfg.validate()?;
    let g = cfg.grid();
    let steps = cfg.steps();
    let mut state = initial_state(cfg)?;
    let mut s = cfg.source.eval(g, 0.0)?;
    let mut ledger = EnergyLedger::start(cfg)?;
    let mut last = step_report(cfg, &state, &s, &ledger)?;
    observer.observe(cfg, &state, &last)?;
    for step in 1..=steps {
        let dt = if step == steps {
            cfg.t_end - state.t
        } else {
            cfg.dt
        };
        if dt <= 0.0 {
            break;
        }
        ledger.accumulate(cfg, &state, &s, dt)?;

        let rho = continuity_step(&state.rho, &state.u, cfg.alpha_k, dt, cfg.advection)?;
        let (rho, clipped) = clip_negative(rho, ledger.mass0)?;
        ledger.clipped += clipped;
        let damping = damping_field(&state.u, &state.rho, cfg.law.gamma())?;
        let w = weight_step(&state.w, &state.u, &damping, cfg.lambda_w, dt, cfg.interpolation)?;

        let t = if step == steps {
            cfg.t_end
        } else {
            state.t + dt
        };
        let rho_max = rho.max();
        if !rho_max.is_finite() {
            return Err(Error::NonFinite(format!("density at t = {t}")));
        }
        if rho_max > cfg.rho_cap {
            return Err(Error::BlowUp {
                t,
                max_rho: rho_max,
                cap: cfg.rho_cap,
            });
        }
        s = cfg.source.eval(g, t)?;
        let u = solve_velocity_with(&rho, &s, cfg.mu, cfg.alpha, &cfg.law, cfg.dealias_pressure)?;
        state = SimState {
            t,
            rho,
            u,
            w,
            step_index: step,
        };
        if step % cfg.emit_every == 0 || step == steps {
            last = step_report(cfg, &state, &s, &ledger)?;
            observer.observe(cfg, &state, &last)?;
        }
    }
    if last.step != state.step_index {
        last = step_report(cfg, &state, &s, &ledger)?;
    }
    Ok(RunOutcome {
        final_state: state,
        final_report: last,
        steps,
    })
}
