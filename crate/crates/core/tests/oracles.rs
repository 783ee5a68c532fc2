//! Frozen values from an independent high-precision evaluation (cell
//! integrals of the kernel by adaptive quadrature, direct double sums in
//! 40-digit arithmetic), plus estimator consistency checks.

// oracle digits are kept as computed
#![allow(clippy::excessive_precision)]

use brinkman_core::diagnostics::{deweight_bound, unweighted_modulus, weighted_modulus, PairSampler};
use brinkman_core::harmonic::{kernel_l1, KernelSpec, KernelWeights};
use brinkman_core::solver::{run_simulation, scenarios, InitialDensity, SimConfig, SimState, StepReport};
use brinkman_core::{PeriodicGrid, ScalarField};
use std::f64::consts::PI;

const L1_H0_1E2: f64 = 4.605170185988091368;
const INDICATOR_HALF: f64 = 2.1826165179682814114;
const MIXED: f64 = 0.95168729669823621804;

fn setup() -> (PeriodicGrid, KernelWeights) {
    let g = PeriodicGrid::new(1, 128).unwrap();
    (g, KernelWeights::new(&KernelSpec::integrated(2.0, 1e-2), g).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn kernel_mass_matches_oracle() {
    let (g, kw) = setup();
    assert!(rel(kw.l1(), L1_H0_1E2) < 1e-12);
    // the grid-sampled variant refuses spacing > h0/2
    let spec = KernelSpec::integrated(2.0, 1e-2);
    assert!(matches!(kernel_l1(&spec, g), Err(brinkman_core::Error::Unresolved { .. })));
    let fine = PeriodicGrid::new(1, 256).unwrap();
    assert!(rel(kernel_l1(&spec, fine).unwrap(), L1_H0_1E2) < 1e-12);
}

#[test]
fn indicator_modulus_matches_oracle() {
    let (g, kw) = setup();
    let rho = ScalarField::from_fn(g, |p| if p[0] < 0.5 { 1.0 } else { 0.0 }).unwrap();
    let w = ScalarField::constant(g, 1.0);
    let r = weighted_modulus(&rho, &w, &kw, &PairSampler::Full).unwrap();
    assert!(rel(r.value, INDICATOR_HALF) < 1e-12, "{}", r.value);
    // unit weight carries the factor w^x + w^y = 2
    let u = unweighted_modulus(&rho, &kw, &PairSampler::Full, 1.0).unwrap();
    assert!(rel(r.value, 2.0 * u.value) < 1e-13);
}

#[test]
fn mixed_modulus_matches_oracle() {
    let (g, kw) = setup();
    let rho = ScalarField::from_fn(g, |p| {
        1.0 + 0.3 * (2.0 * PI * p[0]).sin() + if (0.2..0.45).contains(&p[0]) { 0.5 } else { 0.0 }
    })
    .unwrap();
    let w = ScalarField::from_fn(g, |p| 0.5 + 0.4 * (2.0 * PI * p[0]).cos()).unwrap();
    let r = weighted_modulus(&rho, &w, &kw, &PairSampler::Full).unwrap();
    assert!(rel(r.value, MIXED) < 1e-12, "{}", r.value);
}

#[test]
fn monte_carlo_agrees_with_full_sum_in_2d() {
    let g = PeriodicGrid::new(2, 32).unwrap();
    let kw = KernelWeights::new(&KernelSpec::integrated(3.0, 1e-2), g).unwrap();
    let rho = InitialDensity::Indicator {
        lo: 0.25,
        hi: 0.6,
        inside: 2.0,
        outside: 1.0,
    }
    .field(g)
    .unwrap();
    let w = ScalarField::from_fn(g, |p| 0.7 + 0.2 * (2.0 * PI * (p[0] + p[1])).cos()).unwrap();
    let full = weighted_modulus(&rho, &w, &kw, &PairSampler::Full).unwrap().value;
    for seed in [1, 2, 3] {
        let mc = weighted_modulus(&rho, &w, &kw, &PairSampler::monte_carlo(200_000, seed)).unwrap();
        assert!(mc.std_err > 0.0);
        assert!((mc.value - full).abs() <= 3.0 * mc.std_err, "seed {seed}: {} vs {full}", mc.value);
    }
}

#[test]
fn deweight_bound_dominates_along_a_run() {
    let g = PeriodicGrid::new(1, 128).unwrap();
    let mut cfg: SimConfig = scenarios::nonmonotone(g).unwrap();
    cfg.t_end = 0.1;
    let kernels: Vec<KernelWeights> = [1e-1, 1e-2]
        .iter()
        .map(|&h| KernelWeights::new(&KernelSpec::integrated(2.0, h), g).unwrap())
        .collect();
    let mut checked = 0;
    let mut obs = |_: &SimConfig, s: &SimState, r: &StepReport| -> brinkman_core::Result<()> {
        for kw in &kernels {
            let weighted = weighted_modulus(&s.rho, &s.w, kw, &PairSampler::Full)?.value;
            let plain = unweighted_modulus(&s.rho, kw, &PairSampler::Full, 1.0)?.value;
            assert!(weighted <= 2.0 * plain * (1.0 + 1e-12));
            let h0 = kw.spec().finest_scale();
            let b = deweight_bound(weighted, r.weight_budget.value, h0, kw.l1())?;
            assert!(b.bound >= plain, "bound {} below modulus {plain} at t = {}", b.bound, s.t);
            checked += 1;
        }
        Ok(())
    };
    run_simulation(&cfg, &mut obs).unwrap();
    assert!(checked > 10);
}
