//! Barotropic pressure laws.
//!
//! A law `P` is admissible when `P(0) = 0` and, for some constants `C ≥ 1`
//! and `P̄`,
//!
//! ```text
//! C⁻¹ρ^γ − C ≤ P(ρ) ≤ Cρ^γ + C,        |P'(s)| ≤ P̄ s^{γ−1}.
//! ```
//!
//! The second bound forces `P'(0⁺) = 0`, so the non-monotone built-in
//! families are multiplicative perturbations of `ρ^γ`.

mod piecewise;

pub use piecewise::{PiecewisePolynomial, PiecewiseTable};

use crate::error::{invalid, Error, Result};
use crate::quadrature;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Evaluation interface shared by base and truncated laws.
pub trait Barotropic: Send + Sync {
    fn pressure(&self, rho: f64) -> f64;
    fn derivative(&self, rho: f64) -> f64;
    /// Growth exponent used by the hypotheses and by the damping `ρ^γ`.
    fn gamma(&self) -> f64;
    fn label(&self) -> String;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawKind {
    /// `P = ρ^γ`.
    GammaLaw,
    /// `P = ρ^γ (1 + ε cos(ω log(1 + ρ)))`.
    NonmonotoneWave { eps: f64, omega: f64 },
    /// `P = ρ^γ − depth · sin²(π (ρ − left)/(right − left))` on `[left, right]`,
    /// `ρ^γ` elsewhere. `C¹`, with one decreasing interval when `depth` is large enough.
    TwoWell { left: f64, right: f64, depth: f64 },
    /// User table; see [`PiecewisePolynomial`].
    Piecewise(PiecewisePolynomial),
}

/// Constants fitted by [`validate_law`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    pub c: f64,
    pub pbar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureLaw {
    gamma: f64,
    kind: LawKind,
    label: String,
    fitted: Option<FittedConstants>,
}

/// Scan used when built-in laws validate themselves at construction.
pub const DEFAULT_SCAN_MAX: f64 = 10.0;
pub const DEFAULT_SCAN_SAMPLES: usize = 2000;

impl PressureLaw {
    fn unchecked(gamma: f64, kind: LawKind, label: String) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must exceed 1, got {gamma}")));
        }
        Ok(Self {
            gamma,
            kind,
            label,
            fitted: None,
        })
    }

    /// Validates a built-in family and keeps the fitted constants; failure is an error.
    fn validated(self) -> Result<Self> {
        let report = validate_law(&self, DEFAULT_SCAN_MAX, DEFAULT_SCAN_SAMPLES)?;
        if !report.pass {
            return Err(invalid(
                self.label.clone(),
                format!(
                    "fails the growth hypotheses on (0, {DEFAULT_SCAN_MAX}] (C = {}, P̄ = {})",
                    report.c_fit, report.pbar_fit
                ),
            ));
        }
        Ok(self.with_fitted(&report))
    }

    pub fn gamma_law(gamma: f64) -> Result<Self> {
        Self::unchecked(gamma, LawKind::GammaLaw, format!("gamma_law(gamma={gamma})"))?.validated()
    }

    pub fn nonmonotone_wave(gamma: f64, eps: f64, omega: f64) -> Result<Self> {
        if !(eps.abs() < 1.0) {
            return Err(invalid("eps", format!("|eps| must be below 1, got {eps}")));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("must be finite and >= 0, got {omega}")));
        }
        Self::unchecked(
            gamma,
            LawKind::NonmonotoneWave { eps, omega },
            format!("nonmonotone_wave(gamma={gamma}, eps={eps}, omega={omega})"),
        )?
        .validated()
    }

    pub fn two_well(gamma: f64, left: f64, right: f64, depth: f64) -> Result<Self> {
        if !(left > 0.0 && right > left && right.is_finite()) {
            return Err(invalid("left/right", format!("need 0 < left < right, got {left}, {right}")));
        }
        if !(depth >= 0.0 && depth.is_finite()) {
            return Err(invalid("depth", format!("must be finite and >= 0, got {depth}")));
        }
        Self::unchecked(
            gamma,
            LawKind::TwoWell { left, right, depth },
            format!("two_well(gamma={gamma}, left={left}, right={right}, depth={depth})"),
        )?
        .validated()
    }

    /// Custom tabulated law. Validation is left to the caller (advisory).
    pub fn piecewise(gamma: f64, label: &str, table: PiecewisePolynomial) -> Result<Self> {
        table.check()?;
        Self::unchecked(gamma, LawKind::Piecewise(table), label.to_string())
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn fitted(&self) -> Option<FittedConstants> {
        self.fitted
    }

    pub fn with_fitted(mut self, report: &ValidationReport) -> Self {
        self.fitted = report.pass.then_some(FittedConstants {
            c: report.c_fit,
            pbar: report.pbar_fit,
        });
        self
    }
}

impl Barotropic for PressureLaw {
    fn pressure(&self, rho: f64) -> f64 {
        let g = self.gamma;
        match &self.kind {
            LawKind::GammaLaw => rho.powf(g),
            LawKind::NonmonotoneWave { eps, omega } => {
                rho.powf(g) * (1.0 + eps * (omega * rho.ln_1p()).cos())
            }
            LawKind::TwoWell { left, right, depth } => {
                let base = rho.powf(g);
                if rho > *left && rho < *right {
                    let s = (rho - left) / (right - left);
                    base - depth * (PI * s).sin().powi(2)
                } else {
                    base
                }
            }
            LawKind::Piecewise(t) => t.value(rho),
        }
    }

    fn derivative(&self, rho: f64) -> f64 {
        let g = self.gamma;
        match &self.kind {
            LawKind::GammaLaw => g * rho.powf(g - 1.0),
            LawKind::NonmonotoneWave { eps, omega } => {
                let theta = omega * rho.ln_1p();
                g * rho.powf(g - 1.0) * (1.0 + eps * theta.cos())
                    - rho.powf(g) * eps * omega * theta.sin() / (1.0 + rho)
            }
            LawKind::TwoWell { left, right, depth } => {
                let base = g * rho.powf(g - 1.0);
                if rho > *left && rho < *right {
                    let w = right - left;
                    let s = (rho - left) / w;
                    base - depth * PI * (2.0 * PI * s).sin() / w
                } else {
                    base
                }
            }
            LawKind::Piecewise(t) => t.derivative(rho),
        }
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Named constructor used by configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BuiltinLaw {
    GammaLaw { gamma: f64 },
    NonmonotoneWave { gamma: f64, eps: f64, omega: f64 },
    TwoWell { gamma: f64, left: f64, right: f64, depth: f64 },
}

pub fn builtin_law(spec: &BuiltinLaw) -> Result<PressureLaw> {
    match *spec {
        BuiltinLaw::GammaLaw { gamma } => PressureLaw::gamma_law(gamma),
        BuiltinLaw::NonmonotoneWave { gamma, eps, omega } => {
            PressureLaw::nonmonotone_wave(gamma, eps, omega)
        }
        BuiltinLaw::TwoWell {
            gamma,
            left,
            right,
            depth,
        } => PressureLaw::two_well(gamma, left, right, depth),
    }
}

/// `P_ε`: the base law up to `c0`, then `P(c0) + C (ρ − c0)^β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedLaw {
    base: PressureLaw,
    c0: f64,
    beta: f64,
    cmatch: f64,
}

pub const DEFAULT_BETA: f64 = 4.0;

/// Builds `P_ε` with `C = max(1, P'(c0⁻)/β)`.
pub fn truncate(law: &PressureLaw, c0: f64, beta: f64) -> Result<TruncatedLaw> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(invalid("c0", format!("must be positive, got {c0}")));
    }
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(invalid("beta", format!("must exceed 1, got {beta}")));
    }
    let p = law.pressure(c0);
    let dp = law.derivative(c0);
    if !p.is_finite() || !dp.is_finite() {
        return Err(Error::NonFinite(format!("pressure law at c0 = {c0}")));
    }
    Ok(TruncatedLaw {
        base: law.clone(),
        c0,
        beta,
        cmatch: (dp / beta).max(1.0),
    })
}

impl TruncatedLaw {
    pub fn base(&self) -> &PressureLaw {
        &self.base
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn cmatch(&self) -> f64 {
        self.cmatch
    }
}

impl Barotropic for TruncatedLaw {
    fn pressure(&self, rho: f64) -> f64 {
        if rho <= self.c0 {
            self.base.pressure(rho)
        } else {
            self.base.pressure(self.c0) + self.cmatch * (rho - self.c0).powf(self.beta)
        }
    }

    fn derivative(&self, rho: f64) -> f64 {
        if rho <= self.c0 {
            self.base.derivative(rho)
        } else {
            self.cmatch * self.beta * (rho - self.c0).powf(self.beta - 1.0)
        }
    }

    fn gamma(&self) -> f64 {
        self.base.gamma
    }

    fn label(&self) -> String {
        format!("truncated({}, c0={}, beta={})", self.base.label, self.c0, self.beta)
    }
}

/// Either kind of law, as carried by a simulation configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Law {
    Base(PressureLaw),
    Truncated(TruncatedLaw),
}

impl Law {
    /// The untruncated law (the one whose constants were fitted).
    pub fn base(&self) -> &PressureLaw {
        match self {
            Law::Base(l) => l,
            Law::Truncated(t) => &t.base,
        }
    }
}

impl From<PressureLaw> for Law {
    fn from(l: PressureLaw) -> Self {
        Law::Base(l)
    }
}

impl From<TruncatedLaw> for Law {
    fn from(l: TruncatedLaw) -> Self {
        Law::Truncated(l)
    }
}

impl Barotropic for Law {
    fn pressure(&self, rho: f64) -> f64 {
        match self {
            Law::Base(l) => l.pressure(rho),
            Law::Truncated(l) => l.pressure(rho),
        }
    }
    fn derivative(&self, rho: f64) -> f64 {
        match self {
            Law::Base(l) => l.derivative(rho),
            Law::Truncated(l) => l.derivative(rho),
        }
    }
    fn gamma(&self) -> f64 {
        match self {
            Law::Base(l) => l.gamma(),
            Law::Truncated(l) => l.gamma(),
        }
    }
    fn label(&self) -> String {
        match self {
            Law::Base(l) => l.label(),
            Law::Truncated(l) => l.label(),
        }
    }
}

/// Relative tolerance of the internal-energy quadrature.
pub const ENERGY_REL_TOL: f64 = 1e-10;

/// `e(ρ) = ∫_{ρ*}^{ρ} P(s)/s² ds` (signed).
pub fn internal_energy<L: Barotropic + ?Sized>(law: &L, rho: f64, rho_ref: f64) -> Result<f64> {
    if !(rho_ref > 0.0 && rho_ref.is_finite()) {
        return Err(invalid("rho_ref", format!("must be positive, got {rho_ref}")));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("rho", format!("must be finite and >= 0, got {rho}")));
    }
    if rho == rho_ref {
        return Ok(0.0);
    }
    quadrature::integrate(|s| law.pressure(s) / (s * s), rho_ref, rho, ENERGY_REL_TOL).map_err(|e| {
        Error::Quadrature(format!("internal energy diverges between {rho} and {rho_ref}: {e}"))
    })
}

/// Outcome of [`validate_law`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub gamma: f64,
    pub rho_max: f64,
    pub samples: usize,
    /// Smallest `C ≥ 1` satisfying the two-sided growth bound on the scan
    /// (`inf` when a blow-up towards 0 is detected).
    pub c_fit: f64,
    /// Smallest `P̄` with `|P'| ≤ P̄ ρ^{γ−1}` on the scan (`inf` on blow-up).
    pub pbar_fit: f64,
    pub pass: bool,
}

/// Ratio growth between the two smallest decades above which a bound is
/// declared to diverge at 0 (a power blow-up `ρ^{-s}` with `s > 0.3`).
const DIVERGENCE_FACTOR: f64 = 2.0;
const SMALLEST_SCALE: f64 = 1e-12;

/// Scans `(0, rho_max]` with `samples` uniform points plus `samples`
/// log-spaced points down to `1e-12·rho_max`, fitting `C` and `P̄`.
pub fn validate_law<L: Barotropic + ?Sized>(
    law: &L,
    rho_max: f64,
    samples: usize,
) -> Result<ValidationReport> {
    if !(rho_max > 0.0 && rho_max.is_finite()) {
        return Err(invalid("rho_max", format!("must be positive, got {rho_max}")));
    }
    if samples < 100 {
        return Err(invalid("samples", format!("need at least 100, got {samples}")));
    }
    let gamma = law.gamma();
    let decades = -SMALLEST_SCALE.log10();
    let mut points: Vec<f64> = (1..=samples)
        .map(|k| rho_max * k as f64 / samples as f64)
        .chain((0..samples).map(|j| {
            rho_max * 10f64.powf(-decades * (1.0 - j as f64 / samples as f64))
        }))
        .collect();
    points.sort_by(f64::total_cmp);

    let mut c_need: f64 = 1.0;
    let mut pbar: f64 = 0.0;
    let mut decade_sup = [0.0f64; 2];
    for &rho in &points {
        let p = law.pressure(rho);
        let dp = law.derivative(rho);
        if !p.is_finite() || !dp.is_finite() {
            return Err(Error::NonFinite(format!("{} at rho = {rho:e}", law.label())));
        }
        let rg = rho.powf(gamma);
        // upper: P ≤ C(ρ^γ + 1); lower: ρ^γ/C − C ≤ P  ⇔  C ≥ (−P + sqrt(P² + 4ρ^γ))/2
        let upper = p / (rg + 1.0);
        let lower = 0.5 * (-p + (p * p + 4.0 * rg).sqrt());
        c_need = c_need.max(upper).max(lower);
        let ratio = dp.abs() / rho.powf(gamma - 1.0);
        pbar = pbar.max(ratio);
        let rel = rho / (rho_max * SMALLEST_SCALE);
        if rel < 10.0 {
            decade_sup[0] = decade_sup[0].max(ratio);
        } else if rel < 100.0 {
            decade_sup[1] = decade_sup[1].max(ratio);
        }
    }
    if decade_sup[0] > DIVERGENCE_FACTOR * decade_sup[1] && decade_sup[0] > 0.0 {
        pbar = f64::INFINITY;
    }
    Ok(ValidationReport {
        label: law.label(),
        gamma,
        rho_max,
        samples,
        c_fit: c_need,
        pbar_fit: pbar,
        pass: c_need.is_finite() && pbar.is_finite(),
    })
}

/// Maximal sub-intervals of the scan where `P' < 0`.
pub fn decreasing_intervals<L: Barotropic + ?Sized>(law: &L, rho_max: f64, samples: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = None;
    for k in 1..=samples {
        let rho = rho_max * k as f64 / samples as f64;
        let neg = law.derivative(rho) < 0.0;
        match (neg, start) {
            (true, None) => start = Some(rho),
            (false, Some(s)) => {
                out.push((s, rho));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, rho_max));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_law_values() {
        let law = PressureLaw::gamma_law(2.0).unwrap();
        assert_eq!(law.pressure(3.0), 9.0);
        assert_eq!(law.pressure(0.0), 0.0);
        assert!(PressureLaw::gamma_law(1.0).is_err());
    }

    #[test]
    fn wave_family_with_small_amplitude_stays_monotone() {
        // 2(1 + 0.2 cos θ) − 0.8 ρ/(1+ρ) sin θ ≥ 1.6 − √0.8 > 0
        let law = PressureLaw::nonmonotone_wave(2.0, 0.2, 4.0).unwrap();
        assert!(decreasing_intervals(&law, 10.0, 200_000).is_empty());
    }

    #[test]
    fn stronger_wave_is_non_monotone() {
        let law = PressureLaw::nonmonotone_wave(2.0, 0.5, 8.0).unwrap();
        let iv = decreasing_intervals(&law, 10.0, 100_000);
        assert!(!iv.is_empty());
        // first decreasing stretch starts where 4ρ/(1+ρ) first beats the γ-term
        assert!(iv[0].0 > 0.7, "{iv:?}");
    }

    #[test]
    fn two_well_has_one_decreasing_interval() {
        let law = PressureLaw::two_well(2.0, 1.0, 2.0, 1.5).unwrap();
        let iv = decreasing_intervals(&law, 10.0, 100_000);
        assert_eq!(iv.len(), 1);
        assert!(iv[0].0 > 1.0 && iv[0].1 < 1.5);
        assert_eq!(law.pressure(0.0), 0.0);
    }

    #[test]
    fn derivatives_match_divided_differences() {
        let laws = [
            PressureLaw::nonmonotone_wave(2.0, 0.5, 8.0).unwrap(),
            PressureLaw::two_well(1.5, 1.0, 2.0, 1.5).unwrap(),
            PressureLaw::gamma_law(3.0).unwrap(),
        ];
        for law in &laws {
            for k in 1..200 {
                let rho = 0.05 * k as f64 + 0.013;
                let h = 1e-6;
                let fd = (law.pressure(rho + h) - law.pressure(rho - h)) / (2.0 * h);
                assert!((fd - law.derivative(rho)).abs() < 1e-6 * (1.0 + fd.abs()), "{}", law.label());
            }
        }
    }

    #[test]
    fn internal_energy_of_quadratic_law() {
        let law = PressureLaw::gamma_law(2.0).unwrap();
        assert_eq!(internal_energy(&law, 1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(internal_energy(&law, 2.0, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(internal_energy(&law, 0.5, 1.0).unwrap(), -0.5, max_relative = 1e-12);
        // ρ → 0 limit for γ = 1.5: e(0) = −∫_0^1 s^{-1/2} ds = −2
        let soft = PressureLaw::gamma_law(1.5).unwrap();
        assert_relative_eq!(internal_energy(&soft, 0.0, 1.0).unwrap(), -2.0, max_relative = 1e-8);
    }

    #[test]
    fn energy_density_identity() {
        // d/dρ[ρ e(ρ)] − e(ρ) = P(ρ)/ρ
        let law = PressureLaw::nonmonotone_wave(2.0, 0.5, 8.0).unwrap();
        let f = |r: f64| r * internal_energy(&law, r, 1.0).unwrap();
        for rho in [0.3, 1.0, 2.7, 6.1] {
            let h = 1e-4;
            let d = (f(rho + h) - f(rho - h)) / (2.0 * h);
            let lhs = d - internal_energy(&law, rho, 1.0).unwrap();
            assert!((lhs - law.pressure(rho) / rho).abs() < 1e-6 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn truncation_branches() {
        let law = PressureLaw::gamma_law(2.0).unwrap();
        let t = truncate(&law, 2.0, 4.0).unwrap();
        assert_eq!(t.cmatch(), 1.0);
        assert_eq!(t.pressure(2.0), 4.0);
        assert_eq!(t.pressure(3.0), 5.0);
        assert_eq!(t.pressure(1.3), law.pressure(1.3));
        assert!(truncate(&law, 0.0, 4.0).is_err());
        assert!(truncate(&law, 1.0, 1.0).is_err());
        // steep base: C picks up P'(c0)/β
        let t = truncate(&law, 10.0, 2.0).unwrap();
        assert_eq!(t.cmatch(), 10.0);
    }

    #[test]
    fn validate_pure_power_law() {
        for gamma in [1.5, 2.0, 3.0] {
            let law = PressureLaw::gamma_law(gamma).unwrap();
            let r = validate_law(&law, 10.0, 1000).unwrap();
            assert!(r.pass);
            assert_relative_eq!(r.c_fit, 1.0, max_relative = 1e-15);
            assert_relative_eq!(r.pbar_fit, gamma, max_relative = 1e-12);
        }
    }

    #[test]
    fn validate_flags_derivative_blow_up_at_zero() {
        // P = ρ² − ρ declared with γ = 2: |P'|/ρ = |2 − 1/ρ| → ∞
        let table = PiecewisePolynomial::new(vec![0.0], vec![vec![0.0, -1.0, 1.0]]).unwrap();
        let law = PressureLaw::piecewise(2.0, "rho^2 - rho", table).unwrap();
        let r = validate_law(&law, 10.0, 1000).unwrap();
        assert!(!r.pass);
        assert!(r.pbar_fit.is_infinite());
    }

    #[test]
    fn validate_wave_law() {
        let law = PressureLaw::nonmonotone_wave(2.0, 0.2, 4.0).unwrap();
        let r = validate_law(&law, 10.0, 1000).unwrap();
        assert!(r.pass && r.c_fit.is_finite() && r.pbar_fit.is_finite());
        // |P'|/ρ ≤ γ(1+ε) + εω
        assert!(r.pbar_fit <= 2.0 * 1.2 + 0.8);
        assert!(r.c_fit >= 1.0);
    }

    #[test]
    fn validate_rejects_small_scans() {
        let law = PressureLaw::gamma_law(2.0).unwrap();
        assert!(validate_law(&law, 10.0, 50).is_err());
        assert!(validate_law(&law, 0.0, 500).is_err());
    }

    #[test]
    fn builtin_names() {
        let l = builtin_law(&BuiltinLaw::TwoWell {
            gamma: 2.0,
            left: 1.0,
            right: 2.0,
            depth: 1.5,
        })
        .unwrap();
        assert!(l.fitted().is_some());
        assert!(builtin_law(&BuiltinLaw::NonmonotoneWave {
            gamma: 2.0,
            eps: 1.5,
            omega: 1.0
        })
        .is_err());
    }
}
