//! Compactness diagnostics: weighted and unweighted moduli `R_{h0}`, the
//! de-weighting bound, translation moduli, the pressure commutator bound,
//! extra integrability, and refinement studies.

mod checks;
mod modulus;
mod study;

pub use checks::{
    commutator_bound_check, commutator_constant, extra_integrability, CommutatorReport, ExtraIntegrability,
    ExtraIntegrabilityReport, PairSource,
};
pub use modulus::{
    deweight_bound, deweight_value, full_allowed, translation_modulus, unweighted_modulus, weighted_modulus,
    DeweightBound, ModulusEstimate, PairSampler, DEWEIGHT_C, FULL_PAIR_LIMIT,
};
pub use study::{refinement_study, StudyOptions, StudyReport, StudyRow};

use crate::error::{invalid, Result};
use crate::fields::{inv_laplacian_div, norm, Norm, PeriodicGrid};
use crate::harmonic::{KernelScale, KernelSpec, KernelWeights};
use crate::pressure::{Barotropic, Law};
use crate::solver::{Observer, SimConfig, SimState, StepReport};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsOptions {
    pub sampler: PairSampler,
    /// Exponents of the `‖ρ‖_{Lp}` series (`inf` for the maximum norm).
    pub lp: Vec<f64>,
    pub theta: f64,
    /// Pairs drawn from the current density for the commutator check (0 disables it).
    pub commutator_pairs: usize,
    pub seed: u64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            sampler: PairSampler::Full,
            lp: vec![1.0, 2.0, f64::INFINITY],
            theta: 1.0,
            commutator_pairs: 1000,
            seed: 0,
        }
    }
}

/// Diagnostics of one emitted state. Vectors are aligned with the
/// collector's kernel list (`rh0`, ...) or its `lp` list.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: usize,
    pub mass: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub dissipation_acc: f64,
    /// `Σ dt ⟨S, u⟩`.
    pub energy_rhs: f64,
    pub viscous_exchange_acc: f64,
    pub energy_gap: f64,
    /// `R_{h0}(t) = ∫∫ K_{h0}(x−y)|ρ^x − ρ^y|(w^x + w^y)`.
    pub rh0: Vec<f64>,
    /// Monte-Carlo standard errors of `rh0` (0 in full mode).
    pub rh0_std_err: Vec<f64>,
    /// `∫∫ K_{h0}(x−y)|ρ^x − ρ^y|`.
    pub rh0_unweighted: Vec<f64>,
    /// Optimised de-weighting bound for each kernel.
    pub deweight_bound: Vec<f64>,
    pub weight_budget: f64,
    pub weight_floored: usize,
    pub lp: Vec<f64>,
    /// `Σ dt ∫ ρ^{γ+θ}` so far.
    pub extra_integrability: f64,
    pub extra_identity_mismatch: f64,
    pub commutator_violation: Option<f64>,
    pub momentum_residual: f64,
    pub div_identity_residual: f64,
    /// `‖Δ⁻¹div(S − αu)‖_{L2}`.
    pub inv_lap_div_norm: f64,
    pub w_min: f64,
    pub w_max: f64,
}

/// Label used in CSV headers: `h0` for integrated kernels, `h` for single scales.
fn kernel_label(spec: &KernelSpec) -> String {
    match spec.scale {
        KernelScale::Integrated { h0, .. } => format!("h0={h0}"),
        KernelScale::Single { h } => format!("h={h}"),
    }
}

/// Observer computing a [`DiagnosticsRecord`] for each emitted state.
pub struct DiagnosticsCollector {
    specs: Vec<KernelSpec>,
    kernels: Vec<KernelWeights>,
    opts: DiagnosticsOptions,
    extra: ExtraIntegrability,
    pub records: Vec<DiagnosticsRecord>,
    /// Snapshots where the de-weighting bound fell below the unweighted modulus.
    pub deweight_failures: usize,
}

impl DiagnosticsCollector {
    pub fn new(grid: PeriodicGrid, law: &Law, specs: &[KernelSpec], opts: DiagnosticsOptions) -> Result<Self> {
        for &p in &opts.lp {
            if !(p >= 1.0) {
                return Err(invalid("lp", format!("exponents must be >= 1, got {p}")));
            }
        }
        let kernels = specs
            .iter()
            .map(|s| KernelWeights::new(s, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            specs: specs.to_vec(),
            kernels,
            extra: ExtraIntegrability::new(opts.theta, law.gamma())?,
            opts,
            records: Vec::new(),
            deweight_failures: 0,
        })
    }

    pub fn kernels(&self) -> &[KernelWeights] {
        &self.kernels
    }

    pub fn extra_integrability(&self) -> ExtraIntegrabilityReport {
        self.extra.report()
    }

    pub fn record(&mut self, cfg: &SimConfig, state: &SimState, report: &StepReport) -> Result<DiagnosticsRecord> {
        self.extra.push(cfg, state)?;
        let extra = self.extra.report();
        let n = self.kernels.len();
        let (mut rh0, mut err, mut unw, mut bound) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for (kw, spec) in self.kernels.iter().zip(&self.specs) {
            let r = weighted_modulus(&state.rho, &state.w, kw, &self.opts.sampler)?;
            let u = unweighted_modulus(&state.rho, kw, &self.opts.sampler, 1.0)?;
            let h0 = spec.finest_scale();
            let b = deweight_bound(r.value, report.weight_budget.value, h0, kw.l1())?;
            if self.opts.sampler == PairSampler::Full && b.bound < u.value * (1.0 - 1e-12) {
                self.deweight_failures += 1;
            }
            rh0.push(r.value);
            err.push(r.std_err);
            unw.push(u.value);
            bound.push(b.bound);
        }
        let lp = self
            .opts
            .lp
            .iter()
            .map(|&p| norm(&state.rho, if p.is_infinite() { Norm::Linf } else { Norm::Lp(p) }))
            .collect::<Result<Vec<_>>>()?;
        let commutator_violation = if self.opts.commutator_pairs > 0 {
            commutator_bound_check(
                cfg.law.base(),
                PairSource::Field {
                    rho: &state.rho,
                    count: self.opts.commutator_pairs,
                    seed: self.opts.seed ^ state.step_index as u64,
                },
            )
            .ok()
            .map(|r| r.max_violation)
        } else {
            None
        };
        let s = cfg.source.eval(state.rho.grid(), state.t)?;
        let inv = inv_laplacian_div(&s.axpby(1.0, &state.u, -cfg.alpha)?);
        Ok(DiagnosticsRecord {
            t: state.t,
            step: state.step_index,
            mass: report.mass,
            energy: report.energy,
            dissipation: report.dissipation,
            dissipation_acc: report.dissipation_acc,
            energy_rhs: report.source_work_acc,
            viscous_exchange_acc: report.viscous_exchange_acc,
            energy_gap: report.energy_gap,
            rh0,
            rh0_std_err: err,
            rh0_unweighted: unw,
            deweight_bound: bound,
            weight_budget: report.weight_budget.value,
            weight_floored: report.weight_budget.floored,
            lp,
            extra_integrability: extra.power,
            extra_identity_mismatch: extra.mismatch(),
            commutator_violation,
            momentum_residual: report.momentum_residual,
            div_identity_residual: report.div_identity_residual,
            inv_lap_div_norm: norm(&inv, Norm::Lp(2.0))?,
            w_min: report.w_min,
            w_max: report.w_max,
        })
    }

    pub fn csv_header(&self) -> String {
        let mut cols: Vec<String> = [
            "t",
            "step",
            "mass",
            "E",
            "dissipation",
            "dissipation_acc",
            "energy_rhs",
            "viscous_exchange_acc",
            "energy_gap",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for prefix in ["Rh0", "Rh0_std_err", "Rh0_unweighted", "deweight_bound"] {
            cols.extend(self.specs.iter().map(|s| format!("{prefix}[{}]", kernel_label(s))));
        }
        cols.extend(["weight_budget".into(), "weight_floored".into()]);
        cols.extend(self.opts.lp.iter().map(|p| format!("lp[p={p}]")));
        cols.extend(
            [
                "extra_integrability",
                "extra_identity_mismatch",
                "commutator_violation",
                "momentum_residual",
                "div_identity_residual",
                "inv_lap_div_norm",
                "w_min",
                "w_max",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    pub fn csv_row(r: &DiagnosticsRecord) -> String {
        let mut v: Vec<String> = vec![
            r.t.to_string(),
            r.step.to_string(),
            r.mass.to_string(),
            r.energy.to_string(),
            r.dissipation.to_string(),
            r.dissipation_acc.to_string(),
            r.energy_rhs.to_string(),
            r.viscous_exchange_acc.to_string(),
            r.energy_gap.to_string(),
        ];
        for list in [&r.rh0, &r.rh0_std_err, &r.rh0_unweighted, &r.deweight_bound] {
            v.extend(list.iter().map(f64::to_string));
        }
        v.push(r.weight_budget.to_string());
        v.push(r.weight_floored.to_string());
        v.extend(r.lp.iter().map(f64::to_string));
        v.push(r.extra_integrability.to_string());
        v.push(r.extra_identity_mismatch.to_string());
        v.push(r.commutator_violation.map_or(String::new(), |c| c.to_string()));
        v.extend(
            [
                r.momentum_residual,
                r.div_identity_residual,
                r.inv_lap_div_norm,
                r.w_min,
                r.w_max,
            ]
            .iter()
            .map(f64::to_string),
        );
        v.join(",")
    }
}

impl Observer for DiagnosticsCollector {
    fn observe(&mut self, cfg: &SimConfig, state: &SimState, report: &StepReport) -> Result<()> {
        let r = self.record(cfg, state, report)?;
        self.records.push(r);
        Ok(())
    }
}
