//! TOML configuration.
//!
//! Sections: `[grid] [physics] [pressure] [time] [weights] [kernels]
//! [output]`, plus `[lemmas]` (read by `verify-lemmas`) and `[study]` (read by
//! `convergence-study`). Unknown sections and keys are rejected, and every
//! error names the offending key as `section.key`.

use crate::error::{CliError, CliResult};
use brinkman_core::diagnostics::{DiagnosticsOptions, PairSampler};
use brinkman_core::harmonic::KernelSpec;
use brinkman_core::pressure::{truncate, validate_law, Law, PiecewiseTable, PressureLaw, ValidationReport, DEFAULT_BETA};
use brinkman_core::solver::{Advection, InitialDensity, SimConfig, Source, SourceTerm};
use brinkman_core::weights::Interpolation;
use brinkman_core::{Error, PeriodicGrid};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const SECTIONS: [&str; 9] = ["grid", "physics", "pressure", "time", "weights", "kernels", "output", "lemmas", "study"];

fn cfg_err(key: impl AsRef<str>, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {reason}", key.as_ref()))
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub h0: Option<Vec<f64>>,
    pub resolutions: Option<Vec<usize>>,
}

/// A parsed configuration file.
#[derive(Clone, Debug)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    sections: BTreeMap<String, toml::Table>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(path, bytes)
    }

    pub fn parse(path: &Path, bytes: Vec<u8>) -> CliResult<Self> {
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut sections = BTreeMap::new();
        for (name, value) in doc {
            if !SECTIONS.contains(&name.as_str()) {
                return Err(cfg_err(&name, "unknown section"));
            }
            match value {
                toml::Value::Table(t) => {
                    sections.insert(name, t);
                }
                _ => return Err(cfg_err(&name, "must be a table")),
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            bytes,
            sections,
        })
    }

    fn section(&self, name: &'static str) -> Section {
        Section {
            name,
            table: self.sections.get(name).cloned().unwrap_or_default(),
        }
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    fn base_dir(&self) -> PathBuf {
        self.path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

/// Keys of one section, consumed as they are read.
struct Section {
    name: &'static str,
    table: toml::Table,
}

impl Section {
    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.name)
    }

    fn missing(&self, k: &str) -> CliError {
        cfg_err(self.key(k), "missing required key")
    }

    fn f64(&mut self, k: &str) -> CliResult<Option<f64>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(v)),
            Some(toml::Value::Integer(v)) => Ok(Some(v as f64)),
            Some(v) => Err(cfg_err(self.key(k), format!("expected a number, got {}", v.type_str()))),
        }
    }

    fn f64_req(&mut self, k: &str) -> CliResult<f64> {
        self.f64(k)?.ok_or_else(|| self.missing(k))
    }

    fn usize(&mut self, k: &str) -> CliResult<Option<usize>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if v >= 0 => Ok(Some(v as usize)),
            Some(v) => Err(cfg_err(self.key(k), format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn usize_req(&mut self, k: &str) -> CliResult<usize> {
        self.usize(k)?.ok_or_else(|| self.missing(k))
    }

    fn typed<T: DeserializeOwned>(&mut self, k: &str) -> CliResult<Option<T>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(v) => v.try_into().map(Some).map_err(|e| cfg_err(self.key(k), e)),
        }
    }

    fn typed_req<T: DeserializeOwned>(&mut self, k: &str) -> CliResult<T> {
        self.typed(k)?.ok_or_else(|| self.missing(k))
    }

    /// Rejects keys that were never read.
    fn finish(self) -> CliResult<()> {
        match self.table.keys().next() {
            Some(k) => Err(cfg_err(format!("{}.{k}", self.name), "unknown key")),
            None => Ok(()),
        }
    }
}

/// Maps a parameter error from the core library onto its config key.
fn core_err(e: Error, section: &str) -> CliError {
    match e {
        Error::InvalidParameter { name, reason } => {
            let key = match name.as_str() {
                "mu" | "alpha" | "alpha_k" | "rho_cap" => format!("physics.{name}"),
                "dt" | "t_end" => format!("time.{name}"),
                "lambda_w" | "lambda" => "weights.lambda".into(),
                "rho_ref" => "pressure.rho_ref".into(),
                "rho0" => "physics.initial".into(),
                "emit_every" => "output.emit_every".into(),
                "a" | "h0" | "h" | "nodes" => format!("kernels.{name}"),
                n if n.starts_with("source") => format!("physics.{n}"),
                n if n.starts_with("initial") => format!("physics.{n}"),
                n => format!("{section}.{n}"),
            };
            cfg_err(key, reason)
        }
        Error::InvalidGrid(m) => cfg_err("grid.n", m),
        other => CliError::Config(format!("{section}: {other}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSettings {
    pub dim: usize,
    pub n: usize,
}

impl GridSettings {
    pub fn grid(&self) -> CliResult<PeriodicGrid> {
        PeriodicGrid::new(self.dim, self.n).map_err(|e| core_err(e, "grid"))
    }
}

fn read_grid(file: &ConfigFile) -> CliResult<GridSettings> {
    let mut s = file.section("grid");
    let g = GridSettings {
        dim: s.usize_req("dim")?,
        n: s.usize_req("n")?,
    };
    s.finish()?;
    if !(1..=2).contains(&g.dim) {
        return Err(cfg_err("grid.dim", format!("must be 1 or 2, got {}", g.dim)));
    }
    Ok(g)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TruncateSpec {
    c0: f64,
    #[serde(default = "default_beta")]
    beta: f64,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

/// The `[pressure]` section.
#[derive(Clone, Debug)]
pub struct PressureSettings {
    /// Law used by the solver (possibly truncated).
    pub law: Law,
    /// Advisory validation of a tabulated law (built-ins validate on construction).
    pub validation: ValidationReport,
    pub builtin: bool,
    pub rho_ref: f64,
    pub scan_max: f64,
    pub scan_samples: usize,
}

pub fn read_pressure(file: &ConfigFile) -> CliResult<PressureSettings> {
    let mut s = file.section("pressure");
    let family: String = s.typed_req("law")?;
    let scan_max = s.f64("scan_max")?.unwrap_or(brinkman_core::pressure::DEFAULT_SCAN_MAX);
    let scan_samples = s.usize("scan_samples")?.unwrap_or(brinkman_core::pressure::DEFAULT_SCAN_SAMPLES);
    let rho_ref = s.f64("rho_ref")?.unwrap_or(1.0);
    let p = |e| core_err(e, "pressure");
    let (base, builtin) = match family.as_str() {
        "gamma_law" => (PressureLaw::gamma_law(s.f64_req("gamma")?).map_err(p)?, true),
        "nonmonotone_wave" => {
            let (g, eps, om) = (s.f64_req("gamma")?, s.f64_req("eps")?, s.f64_req("omega")?);
            (PressureLaw::nonmonotone_wave(g, eps, om).map_err(p)?, true)
        }
        "two_well" => {
            let (g, l, r, d) = (s.f64_req("gamma")?, s.f64_req("left")?, s.f64_req("right")?, s.f64_req("depth")?);
            (PressureLaw::two_well(g, l, r, d).map_err(p)?, true)
        }
        "table" => {
            let rel: String = s.typed_req("table")?;
            let path = file.base_dir().join(&rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| cfg_err("pressure.table", format!("cannot read {}: {e}", path.display())))?;
            let law = PiecewiseTable::from_json(&text)
                .and_then(PiecewiseTable::into_law)
                .map_err(|e| cfg_err("pressure.table", e))?;
            (law, false)
        }
        other => {
            return Err(cfg_err(
                "pressure.law",
                format!("unknown family `{other}` (gamma_law, nonmonotone_wave, two_well, table)"),
            ))
        }
    };
    let validation = validate_law(&base, scan_max, scan_samples).map_err(p)?;
    let base = if !builtin && validation.pass {
        base.with_fitted(&validation)
    } else {
        base
    };
    let law: Law = match s.typed::<TruncateSpec>("truncate")? {
        Some(t) => truncate(&base, t.c0, t.beta)
            .map_err(|e| core_err(e, "pressure.truncate"))?
            .into(),
        None => base.into(),
    };
    s.finish()?;
    Ok(PressureSettings {
        law,
        validation,
        builtin,
        rho_ref,
        scan_max,
        scan_samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerChoice {
    Full,
    MonteCarlo,
    /// Full sums when allowed, Monte-Carlo otherwise.
    Auto,
}

/// The `[kernels]` section (moduli and per-step diagnostics).
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSettings {
    pub h0: Vec<f64>,
    pub a: Option<f64>,
    pub nodes: usize,
    pub sampler: SamplerChoice,
    pub samples: usize,
    pub seed: u64,
    pub theta: f64,
    pub lp: Vec<f64>,
    pub commutator_pairs: usize,
}

impl KernelSettings {
    pub fn specs(&self, dim: usize) -> Vec<KernelSpec> {
        let a = self.a.unwrap_or(KernelSpec::default_exponent(dim));
        self.h0
            .iter()
            .map(|&h| KernelSpec::integrated(a, h).with_nodes(self.nodes))
            .collect()
    }

    pub fn sampler(&self, grid: PeriodicGrid) -> PairSampler {
        match self.sampler {
            SamplerChoice::Full => PairSampler::Full,
            SamplerChoice::MonteCarlo => PairSampler::monte_carlo(self.samples, self.seed),
            SamplerChoice::Auto => PairSampler::auto(grid, self.samples, self.seed),
        }
    }

    pub fn diagnostics_options(&self, grid: PeriodicGrid) -> DiagnosticsOptions {
        DiagnosticsOptions {
            sampler: self.sampler(grid),
            lp: self.lp.clone(),
            theta: self.theta,
            commutator_pairs: self.commutator_pairs,
            seed: self.seed,
        }
    }
}

fn read_kernels(file: &ConfigFile, ov: &Overrides) -> CliResult<KernelSettings> {
    let mut s = file.section("kernels");
    let defaults = DiagnosticsOptions::default();
    let k = KernelSettings {
        h0: s.typed("h0")?.unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]),
        a: s.f64("a")?,
        nodes: s.usize("nodes")?.unwrap_or(brinkman_core::harmonic::DEFAULT_NODES),
        sampler: s.typed("sampler")?.unwrap_or(SamplerChoice::Auto),
        samples: s.usize("samples")?.unwrap_or(200_000),
        seed: s.usize("seed")?.unwrap_or(0) as u64,
        theta: s.f64("theta")?.unwrap_or(defaults.theta),
        lp: s.typed("lp")?.unwrap_or(defaults.lp),
        commutator_pairs: s.usize("commutator_pairs")?.unwrap_or(defaults.commutator_pairs),
    };
    s.finish()?;
    let k = KernelSettings {
        h0: ov.h0.clone().unwrap_or(k.h0),
        seed: ov.seed.unwrap_or(k.seed),
        ..k
    };
    if k.h0.is_empty() {
        return Err(cfg_err("kernels.h0", "needs at least one value"));
    }
    Ok(k)
}

/// The `[output]` section.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    /// Snapshot stride in steps (0: initial and final state only).
    pub every: usize,
    /// Diagnostics CSV stride in steps.
    pub emit_every: usize,
}

fn read_output(file: &ConfigFile) -> CliResult<OutputSettings> {
    let mut s = file.section("output");
    let o = OutputSettings {
        dir: s.typed::<String>("dir")?.map(|d| file.base_dir().join(d)),
        every: s.usize("every")?.unwrap_or(10),
        emit_every: s.usize("emit_every")?.unwrap_or(1),
    };
    s.finish()?;
    if o.emit_every == 0 {
        return Err(cfg_err("output.emit_every", "must be at least 1"));
    }
    Ok(o)
}

/// Everything a simulation needs.
#[derive(Clone, Debug)]
pub struct RunSettings {
    pub grid: GridSettings,
    pub sim: SimConfig,
    pub pressure: PressureSettings,
    pub kernels: KernelSettings,
    pub output: OutputSettings,
    /// `time.courant` when the step is tied to the grid (`dt = courant / n`).
    pub courant: Option<f64>,
}

/// Builds the simulation from the file; `n` replaces `grid.n` when given.
pub fn read_run(file: &ConfigFile, ov: &Overrides, n: Option<usize>) -> CliResult<RunSettings> {
    let mut grid = read_grid(file)?;
    if let Some(n) = n {
        grid.n = n;
    }
    let g = grid.grid()?;
    let pressure = read_pressure(file)?;
    let kernels = read_kernels(file, ov)?;
    let output = read_output(file)?;

    let mut ph = file.section("physics");
    let mu = ph.f64_req("mu")?;
    let alpha = ph.f64_req("alpha")?;
    let alpha_k = ph.f64("alpha_k")?.unwrap_or(0.0);
    let advection: Advection = ph.typed("advection")?.unwrap_or_default();
    let dealias_pressure: bool = ph.typed("dealias_pressure")?.unwrap_or(false);
    let rho_cap = ph.f64("rho_cap")?;
    let initial: InitialDensity = ph.typed_req("initial")?;
    let terms: Vec<SourceTerm> = ph.typed("source")?.unwrap_or_default();
    ph.finish()?;

    let mut tm = file.section("time");
    let dt = tm.f64("dt")?;
    let courant = tm.f64("courant")?;
    let t_end = tm.f64_req("t_end")?;
    tm.finish()?;
    let dt = match (dt, courant) {
        (Some(dt), None) => dt,
        (None, Some(c)) => c / grid.n as f64,
        (None, None) => return Err(cfg_err("time.dt", "missing required key (or set time.courant)")),
        (Some(_), Some(_)) => return Err(cfg_err("time.courant", "set either time.dt or time.courant, not both")),
    };

    let mut w = file.section("weights");
    let lambda = w.f64("lambda")?;
    let interpolation: Interpolation = w.typed("interpolation")?.unwrap_or_default();
    w.finish()?;

    let rho0 = initial.field(g).map_err(|e| core_err(e, "physics"))?;
    let mut sim = SimConfig::new(rho0, pressure.law.clone());
    sim.mu = mu;
    sim.alpha = alpha;
    sim.alpha_k = alpha_k;
    sim.dt = dt;
    sim.t_end = t_end;
    sim.source = Source { terms };
    sim.rho_ref = pressure.rho_ref;
    sim.advection = advection;
    sim.interpolation = interpolation;
    sim.dealias_pressure = dealias_pressure;
    if let Some(c) = rho_cap {
        sim.rho_cap = c;
    }
    if let Some(l) = lambda {
        sim.lambda_w = l;
    }
    sim.kernels = kernels.specs(grid.dim);
    sim.validate().map_err(|e| core_err(e, "physics"))?;
    Ok(RunSettings {
        grid,
        sim,
        pressure,
        kernels,
        output,
        courant,
    })
}

/// The `[lemmas]` section: random field ensemble for `verify-lemmas`.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaSettings {
    pub dim: usize,
    pub fields: usize,
    pub kmax: i64,
    pub decay: f64,
    /// Use identically zero fields instead of random ones.
    pub zero: bool,
    pub pairs: usize,
    pub resolutions: Vec<usize>,
    pub h0: Vec<f64>,
    pub a: Option<f64>,
    pub nodes: usize,
    pub seed: u64,
}

pub fn read_lemmas(file: &ConfigFile, ov: &Overrides) -> CliResult<LemmaSettings> {
    let dim = if file.has_section("grid") { read_grid(file)?.dim } else { 1 };
    let mut s = file.section("lemmas");
    let l = LemmaSettings {
        dim,
        fields: s.usize("fields")?.unwrap_or(5),
        kmax: s.usize("kmax")?.unwrap_or(16) as i64,
        decay: s.f64("decay")?.unwrap_or(1.0),
        zero: s.typed("zero")?.unwrap_or(false),
        pairs: s.usize("pairs")?.unwrap_or(5000),
        resolutions: s.typed("resolutions")?.unwrap_or_else(|| vec![256, 512]),
        h0: s.typed("h0")?.unwrap_or_else(|| vec![1e-1, 5e-2, 2e-2]),
        a: s.f64("a")?,
        nodes: s.usize("nodes")?.unwrap_or(brinkman_core::harmonic::DEFAULT_NODES),
        seed: s.usize("seed")?.unwrap_or(0) as u64,
    };
    s.finish()?;
    let l = LemmaSettings {
        resolutions: ov.resolutions.clone().unwrap_or(l.resolutions),
        h0: ov.h0.clone().unwrap_or(l.h0),
        seed: ov.seed.unwrap_or(l.seed),
        ..l
    };
    if l.resolutions.len() < 2 {
        return Err(cfg_err(
            "lemmas.resolutions",
            format!("stability needs at least 2 resolutions, got {}", l.resolutions.len()),
        ));
    }
    if l.fields == 0 {
        return Err(cfg_err("lemmas.fields", "must be at least 1"));
    }
    if l.kmax < 1 {
        return Err(cfg_err("lemmas.kmax", "must be at least 1"));
    }
    if l.h0.is_empty() {
        return Err(cfg_err("lemmas.h0", "needs at least one value"));
    }
    Ok(l)
}

/// The `[study]` section for `convergence-study`.
#[derive(Clone, Debug, PartialEq)]
pub struct StudySettings {
    pub scenario: String,
    pub resolutions: Vec<usize>,
}

pub fn read_study(file: &ConfigFile, ov: &Overrides) -> CliResult<StudySettings> {
    let mut s = file.section("study");
    let scenario: Option<String> = s.typed("scenario")?;
    let resolutions: Option<Vec<usize>> = s.typed("resolutions")?;
    s.finish()?;
    let resolutions = ov
        .resolutions
        .clone()
        .or(resolutions)
        .ok_or_else(|| cfg_err("study.resolutions", "missing required key (or pass --resolutions)"))?;
    if resolutions.len() < 3 {
        return Err(cfg_err(
            "study.resolutions",
            format!("need at least 3 resolutions, got {}", resolutions.len()),
        ));
    }
    let scenario = scenario.unwrap_or_else(|| {
        file.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "study".into())
    });
    Ok(StudySettings { scenario, resolutions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> CliResult<ConfigFile> {
        ConfigFile::parse(Path::new("test.toml"), text.as_bytes().to_vec())
    }

    const BASE: &str = r#"
[grid]
dim = 1
n = 32
[physics]
mu = 1.0
alpha = 1
initial = { kind = "constant", value = 1.5 }
[pressure]
law = "gamma_law"
gamma = 2.0
[time]
dt = 0.01
t_end = 0.05
"#;

    fn message(e: CliError) -> String {
        match e {
            CliError::Config(m) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_builds() {
        let f = parse(BASE).unwrap();
        let r = read_run(&f, &Overrides::default(), None).unwrap();
        assert_eq!(r.sim.grid().n(), 32);
        assert_eq!(r.sim.alpha, 1.0);
        assert_eq!(r.kernels.h0, vec![1e-1, 1e-2, 1e-3]);
        assert_eq!(r.sim.lambda_w, 4.0);
        assert!(r.pressure.builtin && r.pressure.validation.pass);
    }

    #[test]
    fn missing_and_unknown_keys_are_named() {
        let f = parse(&BASE.replace("mu = 1.0\n", "")).unwrap();
        let m = message(read_run(&f, &Overrides::default(), None).unwrap_err());
        assert!(m.contains("physics.mu"), "{m}");

        let f = parse(&BASE.replace("mu = 1.0", "mu = 1.0\nmuu = 2")).unwrap();
        let m = message(read_run(&f, &Overrides::default(), None).unwrap_err());
        assert!(m.contains("physics.muu"), "{m}");

        let f = parse(&BASE.replace("mu = 1.0", "mu = -1.0")).unwrap();
        let m = message(read_run(&f, &Overrides::default(), None).unwrap_err());
        assert!(m.contains("physics.mu"), "{m}");

        let f = parse(&BASE.replace("dt = 0.01", "")).unwrap();
        assert!(message(read_run(&f, &Overrides::default(), None).unwrap_err()).contains("time.dt"));

        let f = parse(&BASE.replace("gamma = 2.0", "gamma = \"two\"")).unwrap();
        assert!(message(read_run(&f, &Overrides::default(), None).unwrap_err()).contains("pressure.gamma"));

        let m = message(parse("[bogus]\nx = 1").unwrap_err());
        assert!(m.starts_with("bogus"), "{m}");
    }

    #[test]
    fn overrides_and_courant() {
        let text = BASE.replace("dt = 0.01", "courant = 0.32") + "[kernels]\nh0 = [0.1, 0.01, 0.001]\nseed = 3\n";
        let f = parse(&text).unwrap();
        let ov = Overrides {
            seed: Some(9),
            h0: Some(vec![0.2, 0.02, 0.002]),
            resolutions: None,
        };
        let r = read_run(&f, &ov, Some(64)).unwrap();
        assert_eq!(r.sim.dt, 0.005);
        assert_eq!(r.kernels.seed, 9);
        assert_eq!(r.kernels.h0[0], 0.2);
    }

    #[test]
    fn lemma_and_study_preconditions() {
        let f = parse("[lemmas]\nresolutions = [256]\n").unwrap();
        assert!(message(read_lemmas(&f, &Overrides::default()).unwrap_err()).contains("lemmas.resolutions"));
        let f = parse("[study]\nresolutions = [16, 32]\n").unwrap();
        assert!(message(read_study(&f, &Overrides::default()).unwrap_err()).contains("study.resolutions"));
        let f = parse(BASE).unwrap();
        let ov = Overrides {
            resolutions: Some(vec![16, 32, 64]),
            ..Default::default()
        };
        assert_eq!(read_study(&f, &ov).unwrap().scenario, "test");
    }
}
