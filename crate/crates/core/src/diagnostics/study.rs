//! Refinement study: one scenario at several resolutions, with
//! `sup_t R_{h0}/‖K_{h0}‖_{L1}` tabulated per `(resolution, h0)`.

use super::modulus::{unweighted_modulus, weighted_modulus, PairSampler};
use crate::error::{invalid, Result};
use crate::fields::PeriodicGrid;
use crate::harmonic::{KernelSpec, KernelWeights, DEFAULT_NODES};
use crate::solver::{run_simulation, SimConfig, SimState, StepReport};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    /// Kernel exponent (`None`: `d + 1`).
    pub a: Option<f64>,
    pub nodes: usize,
    /// Monte-Carlo draws when full pair sums are not allowed.
    pub samples: usize,
    pub seed: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            a: None,
            nodes: DEFAULT_NODES,
            samples: 200_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub resolution: usize,
    /// `sup_t R_{h0}(t) / ‖K_{h0}‖_{L1}`, one entry per `h0`.
    pub weighted: Vec<f64>,
    /// `sup_t` of the unweighted modulus over `‖K_{h0}‖_{L1}`.
    pub unweighted: Vec<f64>,
    /// Normalised unweighted modulus of `ρ₀` with the single-scale kernel `K̄_{h0}`.
    pub initial_modulus: Vec<f64>,
    /// `weighted` is non-increasing along decreasing `h0`.
    pub monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario: String,
    pub resolutions: Vec<usize>,
    /// Sorted in decreasing order.
    pub h0_list: Vec<f64>,
    pub table: Vec<StudyRow>,
    pub monotone_flags: Vec<bool>,
    /// Max over resolutions of the weighted profile.
    pub profile_max: Vec<f64>,
    /// `profile_max[last] / profile_max[0]`.
    pub decay_ratio: f64,
    /// Set when a run failed; the table holds the completed resolutions.
    pub failure: Option<String>,
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

fn run_one(
    cfg: &SimConfig,
    h0s: &[f64],
    a: f64,
    opts: &StudyOptions,
) -> Result<StudyRow> {
    let g = cfg.grid();
    let sampler = PairSampler::auto(g, opts.samples, opts.seed);
    let kernels = h0s
        .iter()
        .map(|&h0| KernelWeights::new(&KernelSpec::integrated(a, h0).with_nodes(opts.nodes), g))
        .collect::<Result<Vec<_>>>()?;
    let initial_modulus = h0s
        .iter()
        .map(|&h0| {
            let kw = KernelWeights::new(&KernelSpec::single(a, h0), g)?;
            Ok(unweighted_modulus(&cfg.rho0, &kw, &sampler, 1.0)?.normalized(&kw))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut weighted = vec![0.0f64; h0s.len()];
    let mut unweighted = vec![0.0f64; h0s.len()];
    let mut observer = |_: &SimConfig, state: &SimState, _: &StepReport| -> Result<()> {
        for (k, kw) in kernels.iter().enumerate() {
            let r = weighted_modulus(&state.rho, &state.w, kw, &sampler)?.normalized(kw);
            let u = unweighted_modulus(&state.rho, kw, &sampler, 1.0)?.normalized(kw);
            weighted[k] = weighted[k].max(r);
            unweighted[k] = unweighted[k].max(u);
        }
        Ok(())
    };
    run_simulation(cfg, &mut observer)?;
    Ok(StudyRow {
        resolution: g.n(),
        monotone: non_increasing(&weighted),
        weighted,
        unweighted,
        initial_modulus,
    })
}

/// Runs `make(grid)` for each resolution and tabulates the normalised
/// moduli. Needs at least three resolutions and three `h0` values.
pub fn refinement_study(
    scenario: &str,
    make: impl Fn(PeriodicGrid) -> Result<SimConfig>,
    dim: usize,
    resolutions: &[usize],
    h0_list: &[f64],
    opts: StudyOptions,
) -> Result<StudyReport> {
    if resolutions.len() < 3 {
        return Err(invalid("resolutions", format!("need at least 3, got {}", resolutions.len())));
    }
    if h0_list.len() < 3 {
        return Err(invalid("h0_list", format!("need at least 3 values, got {}", h0_list.len())));
    }
    let mut h0s = h0_list.to_vec();
    h0s.sort_by(|a, b| b.total_cmp(a));
    let a = opts.a.unwrap_or(KernelSpec::default_exponent(dim));
    let mut table = Vec::new();
    let mut failure = None;
    for &n in resolutions {
        let row = PeriodicGrid::new(dim, n).and_then(&make).and_then(|cfg| run_one(&cfg, &h0s, a, &opts));
        match row {
            Ok(r) => table.push(r),
            Err(e) => {
                failure = Some(format!("resolution {n}: {e}"));
                break;
            }
        }
    }
    let profile_max: Vec<f64> = (0..h0s.len())
        .map(|k| table.iter().map(|r| r.weighted[k]).fold(0.0, f64::max))
        .collect();
    let decay_ratio = if profile_max[0] > 0.0 {
        profile_max[h0s.len() - 1] / profile_max[0]
    } else {
        0.0
    };
    Ok(StudyReport {
        scenario: scenario.to_string(),
        resolutions: resolutions.to_vec(),
        h0_list: h0s,
        monotone_flags: table.iter().map(|r| r.monotone).collect(),
        table,
        profile_max,
        decay_ratio,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::PressureLaw;
    use crate::solver::scenarios;

    #[test]
    fn stationary_study_is_identically_zero() {
        let make = |g| {
            let mut c = scenarios::stationary(g, 1.0, PressureLaw::gamma_law(2.0)?)?;
            c.t_end = 0.01;
            c.dt = 0.005;
            Ok(c)
        };
        let r = refinement_study("stationary", make, 1, &[16, 32, 64], &[1e-3, 1e-1, 1e-2], StudyOptions::default()).unwrap();
        assert_eq!(r.h0_list, vec![1e-1, 1e-2, 1e-3]);
        assert!(r.table.iter().all(|row| row.weighted.iter().all(|&v| v == 0.0)));
        assert!(r.monotone_flags.iter().all(|&f| f));
        assert!(r.failure.is_none());
        assert!(refinement_study("x", make, 1, &[16, 32], &[0.1, 0.01, 0.001], StudyOptions::default()).is_err());
    }

    #[test]
    fn failing_run_gives_partial_report() {
        let make = |g: PeriodicGrid| {
            let mut c = scenarios::stationary(g, 1.0, PressureLaw::gamma_law(2.0)?)?;
            c.t_end = 0.01;
            c.dt = 0.005;
            if g.n() == 32 {
                c.mu = -1.0;
            }
            Ok(c)
        };
        let r = refinement_study("s", make, 1, &[16, 32, 64], &[0.1, 0.01, 0.001], StudyOptions::default()).unwrap();
        assert_eq!(r.table.len(), 1);
        assert!(r.failure.unwrap().contains("mu"));
    }
}
