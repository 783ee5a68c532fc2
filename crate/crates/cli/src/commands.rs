//! Subcommand implementations. Each writes its outputs under one directory
//! and finishes with the manifest.

use crate::config::{
    read_lemmas, read_pressure, read_run, read_study, ConfigFile, LemmaSettings, Overrides, RunSettings,
};
use crate::error::{CliError, CliResult};
use crate::manifest::{CheckResult, RunManifest};
use brinkman_core::diagnostics::{
    commutator_bound_check, refinement_study, DiagnosticsCollector, PairSource, StudyOptions,
};
use brinkman_core::fields::modes::ModeSum;
use brinkman_core::fields::snapshot;
use brinkman_core::fields::{gradient, Field, ScalarField, VectorField};
use brinkman_core::harmonic::{compare_dh_max, square_function_profile, verify_pointwise_lemma, KernelSpec};
use brinkman_core::pressure::{decreasing_intervals, Barotropic, ValidationReport};
use brinkman_core::solver::{
    run_simulation, solve_velocity_with, step_report, EnergyLedger, SimConfig, SimState, StepReport,
};
use brinkman_core::{Error, PeriodicGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const REPLAY_DIR: &str = "replay";

/// Tolerances of the run checks.
pub const MASS_TOL: f64 = 1e-10;
pub const ENERGY_DT_CONSTANT: f64 = 0.2;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const COMMUTATOR_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-6;
/// Accepted band for the ratio of lemma constants between the coarsest and finest resolution.
pub const STABILITY_BAND: (f64, f64) = (0.8, 1.25);
pub const VALIDATION_PAIRS: usize = 100_000;

/// Arguments shared by all subcommands.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub overrides: Overrides,
}

impl Context {
    fn out_dir(&self, from_config: Option<&PathBuf>) -> CliResult<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| from_config.cloned())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn snapshot_name(kind: &str, step: usize) -> String {
    format!("{SNAPSHOT_DIR}/{kind}_{step:06}.bin")
}

/// Worst values seen along a run, for the manifest checks.
#[derive(Default)]
struct Extremes {
    energy0: Option<f64>,
    mass_error: f64,
    energy_gap: f64,
    residual: f64,
    weight_excess: f64,
    commutator: Option<f64>,
}

impl Extremes {
    fn update(&mut self, r: &StepReport) {
        self.energy0.get_or_insert(r.energy);
        self.mass_error = self.mass_error.max(r.mass_error);
        self.energy_gap = self.energy_gap.max(r.energy_gap);
        self.residual = self.residual.max(r.momentum_residual / (r.source_norm + 1.0));
        self.weight_excess = self.weight_excess.max(-r.w_min).max(r.w_max - 1.0);
    }

    fn record_checks(&self, m: &mut RunManifest, cfg: &SimConfig, collector: &DiagnosticsCollector) {
        m.check("mass_conservation", self.mass_error, MASS_TOL);
        let e0 = self.energy0.unwrap_or(0.0);
        m.check("energy_inequality", self.energy_gap, 1e-6 * (e0 + 1.0) + ENERGY_DT_CONSTANT * cfg.dt);
        m.check("momentum_residual", self.residual, RESIDUAL_TOL);
        m.check("weights_in_unit_interval", self.weight_excess, 0.0);
        m.check("deweight_bound", collector.deweight_failures as f64, 0.0);
        if let Some(c) = self.commutator {
            m.check("commutator_bound", c, COMMUTATOR_TOL);
        }
        m.check("extra_integrability_identity", collector.extra_integrability().mismatch(), IDENTITY_TOL);
    }
}

fn check_verdict(manifest: &RunManifest) -> CliResult<()> {
    let failed = manifest.failed_checks();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

/// `run`: simulate, write the diagnostics CSV and snapshots, then the manifest.
pub fn run(ctx: &Context) -> CliResult<PathBuf> {
    let file = ConfigFile::load(&ctx.config)?;
    let rs = read_run(&file, &ctx.overrides, None)?;
    if !rs.pressure.builtin && !rs.pressure.validation.pass {
        eprintln!(
            "warning: pressure law `{}` fails the growth hypotheses on (0, {}] (C = {}, P̄ = {}); running anyway",
            rs.pressure.validation.label, rs.pressure.scan_max, rs.pressure.validation.c_fit, rs.pressure.validation.pbar_fit
        );
    }
    let dir = ctx.out_dir(rs.output.dir.as_ref())?;
    std::fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
    let mut manifest = RunManifest::new("run", &ctx.config, &file.bytes, rs.kernels.seed);
    let result = simulate(&rs, &dir, &mut manifest);
    if let Err(e) = result {
        manifest.failure = Some(e.to_string());
        manifest.finish(&dir)?;
        return Err(e);
    }
    let verdict = check_verdict(&manifest);
    manifest.finish(&dir)?;
    verdict.map(|_| dir)
}

fn simulate(rs: &RunSettings, dir: &Path, manifest: &mut RunManifest) -> CliResult<()> {
    let g = rs.sim.grid();
    let mut collector = DiagnosticsCollector::new(g, &rs.sim.law, &rs.sim.kernels, rs.kernels.diagnostics_options(g))?;
    let mut csv = BufWriter::new(std::fs::File::create(dir.join(DIAGNOSTICS_CSV))?);
    writeln!(csv, "{}", collector.csv_header())?;
    manifest.outputs.push(DIAGNOSTICS_CSV.into());

    let mut cfg = rs.sim.clone();
    let (emit, every) = (rs.output.emit_every, rs.output.every);
    cfg.emit_every = if every > 0 { gcd(emit, every) } else { emit };
    let last_step = cfg.steps();
    let mut ext = Extremes::default();
    let mut outputs = Vec::new();
    let result = {
        let mut observer = |c: &SimConfig, state: &SimState, report: &StepReport| -> brinkman_core::Result<()> {
            let step = state.step_index;
            let last = step == last_step;
            ext.update(report);
            if step.is_multiple_of(emit) || last {
                let rec = collector.record(c, state, report)?;
                if let Some(v) = rec.commutator_violation {
                    ext.commutator = Some(ext.commutator.map_or(v, |w: f64| w.max(v)));
                }
                writeln!(csv, "{}", DiagnosticsCollector::csv_row(&rec))?;
            }
            if step == 0 || last || (every > 0 && step.is_multiple_of(every)) {
                for (kind, field) in [("rho", &state.rho), ("w", &state.w)] {
                    let rel = snapshot_name(kind, step);
                    snapshot::save(&dir.join(&rel), field, kind, state.t)?;
                    outputs.push(rel);
                }
            }
            Ok(())
        };
        run_simulation(&cfg, &mut observer)
    };
    csv.flush()?;
    manifest.outputs.extend(outputs);
    result?;
    ext.record_checks(manifest, &cfg, &collector);
    Ok(())
}

/// Snapshot pairs `(step, rho path, w path)` in step order.
fn list_snapshots(dir: &Path) -> CliResult<Vec<(usize, PathBuf, PathBuf)>> {
    let snap = dir.join(SNAPSHOT_DIR);
    let entries = std::fs::read_dir(&snap)
        .map_err(|e| CliError::Runtime(format!("cannot list {}: {e}", snap.display())))?;
    let mut steps = Vec::new();
    for entry in entries {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(step) = name.strip_prefix("rho_").and_then(|s| s.strip_suffix(".bin")) {
            if let Ok(k) = step.parse::<usize>() {
                steps.push(k);
            }
        }
    }
    steps.sort_unstable();
    let out: Vec<_> = steps
        .into_iter()
        .map(|k| (k, dir.join(snapshot_name("rho", k)), dir.join(snapshot_name("w", k))))
        .collect();
    if out.is_empty() {
        return Err(CliError::Runtime(format!("no density snapshots in {}", snap.display())));
    }
    Ok(out)
}

/// `diagnose`: recompute every diagnostic from the stored snapshots of a run.
/// Time integrals become left sums over the snapshot times.
pub fn diagnose(ctx: &Context) -> CliResult<PathBuf> {
    let file = ConfigFile::load(&ctx.config)?;
    let rs = read_run(&file, &ctx.overrides, None)?;
    let run_dir = ctx.out_dir(rs.output.dir.as_ref())?;
    let dir = run_dir.join(REPLAY_DIR);
    std::fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest::new("diagnose", &ctx.config, &file.bytes, rs.kernels.seed);
    let result = replay(&rs, &run_dir, &dir, &mut manifest);
    if let Err(e) = result {
        manifest.failure = Some(e.to_string());
        manifest.finish(&dir)?;
        return Err(e);
    }
    let verdict = check_verdict(&manifest);
    manifest.finish(&dir)?;
    verdict.map(|_| dir)
}

fn replay(rs: &RunSettings, run_dir: &Path, dir: &Path, manifest: &mut RunManifest) -> CliResult<()> {
    let cfg = &rs.sim;
    let g = cfg.grid();
    let mut collector = DiagnosticsCollector::new(g, &cfg.law, &cfg.kernels, rs.kernels.diagnostics_options(g))?;
    let mut csv = BufWriter::new(std::fs::File::create(dir.join(DIAGNOSTICS_CSV))?);
    writeln!(csv, "{}", collector.csv_header())?;
    manifest.outputs.push(DIAGNOSTICS_CSV.into());

    let mut ledger = EnergyLedger::start(cfg)?;
    let mut prev: Option<(SimState, brinkman_core::VectorField)> = None;
    let mut ext = Extremes::default();
    for (step, rho_path, w_path) in list_snapshots(run_dir)? {
        let (head, rho) = snapshot::load(&rho_path)?;
        let (_, w) = snapshot::load(&w_path)?;
        if rho.grid() != g || w.grid() != g {
            return Err(CliError::Config(format!(
                "grid.n: snapshot {} is {}-d with n = {}, config has {}-d with n = {}",
                rho_path.display(),
                head.dim,
                head.n,
                g.dim(),
                g.n()
            )));
        }
        let s = cfg.source.eval(g, head.time)?;
        let u = solve_velocity_with(&rho, &s, cfg.mu, cfg.alpha, &cfg.law, cfg.dealias_pressure)?;
        if let Some((p, ps)) = &prev {
            ledger.accumulate(cfg, p, ps, head.time - p.t)?;
        }
        let state = SimState {
            t: head.time,
            rho,
            u,
            w,
            step_index: step,
        };
        let report = step_report(cfg, &state, &s, &ledger)?;
        ext.update(&report);
        let rec = collector.record(cfg, &state, &report)?;
        if let Some(v) = rec.commutator_violation {
            ext.commutator = Some(ext.commutator.map_or(v, |w: f64| w.max(v)));
        }
        writeln!(csv, "{}", DiagnosticsCollector::csv_row(&rec))?;
        prev = Some((state, s));
    }
    csv.flush()?;
    // the energy balance over coarse snapshot intervals is not a step-level check
    ext.energy_gap = f64::NEG_INFINITY;
    ext.record_checks(manifest, cfg, &collector);
    manifest.checks.remove("energy_inequality");
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaSection {
    pub lemma_name: String,
    /// Largest constant over the ensemble, per resolution.
    pub constant_estimate: Vec<f64>,
    pub resolutions: Vec<usize>,
    /// `constant_estimate[last] / constant_estimate[0]` (1 when both vanish).
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub fields: usize,
    pub seed: u64,
    pub h0: Vec<f64>,
    pub lemmas: Vec<LemmaSection>,
    pub pass: bool,
}

fn stability(name: &str, constants: Vec<f64>, resolutions: &[usize]) -> LemmaSection {
    let (first, last) = (constants[0], constants[constants.len() - 1]);
    let finite = constants.iter().all(|c| c.is_finite());
    let ratio = if first == 0.0 && last == 0.0 {
        1.0
    } else {
        last / first
    };
    LemmaSection {
        lemma_name: name.to_string(),
        pass: finite && ratio >= STABILITY_BAND.0 && ratio <= STABILITY_BAND.1,
        constant_estimate: constants,
        resolutions: resolutions.to_vec(),
        ratio,
    }
}

fn ensemble(l: &LemmaSettings) -> CliResult<Vec<Vec<ModeSum>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(l.seed);
    (0..l.fields)
        .map(|_| {
            (0..l.dim)
                .map(|_| {
                    if l.zero {
                        Ok(ModeSum::constant(0.0))
                    } else {
                        ModeSum::random(l.dim, l.kmax, l.decay, &mut rng).map_err(|e| CliError::Config(format!("lemmas: {e}")))
                    }
                })
                .collect()
        })
        .collect()
}

fn lemma_err(e: Error) -> CliError {
    match e {
        Error::Unresolved { .. } | Error::InvalidParameter { .. } => CliError::Config(format!("lemmas.h0: {e}")),
        Error::InvalidGrid(m) => CliError::Config(format!("lemmas.resolutions: {m}")),
        other => other.into(),
    }
}

pub fn lemma_report(l: &LemmaSettings) -> CliResult<LemmaReport> {
    let fields = ensemble(l)?;
    let a = l.a.unwrap_or(KernelSpec::default_exponent(l.dim));
    let (mut pointwise, mut dh, mut square) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &l.resolutions {
        let g = PeriodicGrid::new(l.dim, n).map_err(lemma_err)?;
        let (mut c1, mut c2, mut c3) = (0.0f64, 0.0f64, 0.0f64);
        for (i, comps) in fields.iter().enumerate() {
            let sampled: Vec<ScalarField> = comps.iter().map(|m| m.field(g)).collect::<Result<_, _>>()?;
            let first = sampled[0].clone();
            let seed = l.seed.wrapping_add(i as u64);
            c1 = c1.max(verify_pointwise_lemma(&Field::Scalar(first.clone()), l.pairs, seed)?.c_hat);
            c2 = c2.max(compare_dh_max(&gradient(&first).magnitude())?.constant);
            let u = VectorField::new(sampled)?;
            let prof = square_function_profile(&u, &l.h0, a, l.nodes).map_err(lemma_err)?;
            c3 = prof.iter().map(|p| p.statistic).fold(c3, f64::max);
        }
        pointwise.push(c1);
        dh.push(c2);
        square.push(c3);
    }
    let lemmas = vec![
        stability("pointwise_difference", pointwise, &l.resolutions),
        stability("dh_vs_maximal", dh, &l.resolutions),
        stability("square_function", square, &l.resolutions),
    ];
    Ok(LemmaReport {
        fields: l.fields,
        seed: l.seed,
        h0: l.h0.clone(),
        pass: lemmas.iter().all(|s| s.pass),
        lemmas,
    })
}

pub const LEMMA_REPORT: &str = "lemmas.json";

/// `verify-lemmas`: constant estimates per resolution with stability verdicts.
pub fn verify_lemmas(ctx: &Context) -> CliResult<PathBuf> {
    let file = ConfigFile::load(&ctx.config)?;
    let l = read_lemmas(&file, &ctx.overrides)?;
    let dir = ctx.out_dir(None)?;
    let mut manifest = RunManifest::new("verify-lemmas", &ctx.config, &file.bytes, l.seed);
    let report = match lemma_report(&l) {
        Ok(r) => r,
        Err(e) => {
            manifest.failure = Some(e.to_string());
            manifest.finish(&dir)?;
            return Err(e);
        }
    };
    write_json(&dir.join(LEMMA_REPORT), &report)?;
    manifest.outputs.push(LEMMA_REPORT.into());
    for s in &report.lemmas {
        manifest.checks.insert(
            s.lemma_name.clone(),
            CheckResult {
                pass: s.pass,
                value: s.ratio,
                tolerance: STABILITY_BAND.1,
            },
        );
    }
    let verdict = check_verdict(&manifest);
    manifest.finish(&dir)?;
    verdict.map(|_| dir)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PressureReport {
    pub label: String,
    pub validation: ValidationReport,
    pub decreasing_intervals: Vec<(f64, f64)>,
    pub commutator: Option<brinkman_core::diagnostics::CommutatorReport>,
    pub pass: bool,
}

pub const PRESSURE_REPORT: &str = "pressure_report.json";

/// `validate-pressure`: hypothesis scan, decreasing intervals and commutator bound.
pub fn validate_pressure(ctx: &Context) -> CliResult<PathBuf> {
    let file = ConfigFile::load(&ctx.config)?;
    let p = read_pressure(&file)?;
    let dir = ctx.out_dir(None)?;
    let seed = ctx.overrides.seed.unwrap_or(0);
    let mut manifest = RunManifest::new("validate-pressure", &ctx.config, &file.bytes, seed);
    let base = p.law.base();
    let commutator = if p.validation.pass {
        Some(commutator_bound_check(
            base,
            PairSource::Uniform {
                count: VALIDATION_PAIRS,
                rho_max: p.scan_max,
                seed,
            },
        )?)
    } else {
        None
    };
    let report = PressureReport {
        label: p.law.label(),
        decreasing_intervals: decreasing_intervals(base, p.scan_max, p.scan_samples),
        pass: p.validation.pass && commutator.is_some_and(|c| c.max_violation <= COMMUTATOR_TOL),
        validation: p.validation,
        commutator,
    };
    write_json(&dir.join(PRESSURE_REPORT), &report)?;
    manifest.outputs.push(PRESSURE_REPORT.into());
    manifest.checks.insert(
        "growth_hypotheses".into(),
        CheckResult {
            pass: report.validation.pass,
            value: report.validation.pbar_fit,
            tolerance: f64::MAX,
        },
    );
    if let Some(c) = report.commutator {
        manifest.check("commutator_bound", c.max_violation, COMMUTATOR_TOL);
    }
    let verdict = check_verdict(&manifest);
    manifest.finish(&dir)?;
    verdict.map(|_| dir)
}

pub const STUDY_REPORT: &str = "study.json";

/// `convergence-study`: one scenario at several resolutions.
pub fn convergence_study(ctx: &Context) -> CliResult<PathBuf> {
    let file = ConfigFile::load(&ctx.config)?;
    let study = read_study(&file, &ctx.overrides)?;
    let mut configs = BTreeMap::new();
    let mut first = None;
    for &n in &study.resolutions {
        let rs = read_run(&file, &ctx.overrides, Some(n))?;
        let mut cfg = rs.sim.clone();
        cfg.emit_every = rs.output.emit_every;
        configs.insert(n, cfg);
        first.get_or_insert(rs);
    }
    let rs = first.expect("at least three resolutions");
    if rs.kernels.h0.len() < 3 {
        return Err(CliError::Config(format!(
            "kernels.h0: a study needs at least 3 values, got {}",
            rs.kernels.h0.len()
        )));
    }
    let dir = ctx.out_dir(rs.output.dir.as_ref())?;
    let mut manifest = RunManifest::new("convergence-study", &ctx.config, &file.bytes, rs.kernels.seed);
    let opts = StudyOptions {
        a: rs.kernels.a,
        nodes: rs.kernels.nodes,
        samples: rs.kernels.samples,
        seed: rs.kernels.seed,
    };
    let make = |g: PeriodicGrid| -> brinkman_core::Result<SimConfig> {
        configs
            .get(&g.n())
            .cloned()
            .ok_or_else(|| Error::InvalidGrid(format!("no configuration for n = {}", g.n())))
    };
    let report = refinement_study(&study.scenario, make, rs.grid.dim, &study.resolutions, &rs.kernels.h0, opts)
        .map_err(|e| match e {
            e @ (Error::InvalidParameter { .. } | Error::Unresolved { .. }) => CliError::Config(format!("kernels.h0: {e}")),
            other => other.into(),
        })?;
    write_json(&dir.join(STUDY_REPORT), &report)?;
    manifest.outputs.push(STUDY_REPORT.into());
    let monotone = report.monotone_flags.iter().all(|&f| f);
    manifest.checks.insert(
        "monotone_in_h0".into(),
        CheckResult {
            pass: monotone,
            value: report.decay_ratio,
            tolerance: 1.0,
        },
    );
    if let Some(f) = &report.failure {
        manifest.failure = Some(f.clone());
        manifest.finish(&dir)?;
        return Err(CliError::Runtime(f.clone()));
    }
    let verdict = check_verdict(&manifest);
    manifest.finish(&dir)?;
    verdict.map(|_| dir)
}
