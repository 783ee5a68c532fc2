use brinkman_cli::commands::{self, Context};
use brinkman_cli::config::Overrides;
use brinkman_cli::CliError;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Solver and compactness diagnostics for the compressible Brinkman system.
///
/// Exit codes: 0 ok, 2 config error, 3 runtime failure, 4 check failure.
#[derive(Parser, Debug)]
#[command(name = "brinkman-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation and write diagnostics, snapshots and a manifest.
    Run(Common),
    /// Recompute the diagnostics of a finished run from its snapshots.
    Diagnose(Common),
    /// Estimate the harmonic-analysis lemma constants at several resolutions.
    VerifyLemmas(Common),
    /// Scan the pressure law against the growth hypotheses and the commutator bound.
    ValidatePressure(Common),
    /// Tabulate the normalised modulus over resolutions and h0.
    ConvergenceStudy(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides output.dir; default ./out).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for every sampler (overrides kernels.seed and lemmas.seed).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, value_name = "N", env = "BRINKMAN_LAB_THREADS")]
    threads: Option<usize>,
    /// Comma-separated h0 values (overrides kernels.h0 and lemmas.h0).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    h0: Option<Vec<f64>>,
    /// Comma-separated resolutions (overrides study.resolutions and lemmas.resolutions).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    resolutions: Option<Vec<usize>>,
}

type Handler = fn(&Context) -> Result<PathBuf, CliError>;

fn dispatch(cli: Cli) -> Result<PathBuf, CliError> {
    let (run, common): (Handler, Common) = match cli.command {
        Command::Run(c) => (commands::run, c),
        Command::Diagnose(c) => (commands::diagnose, c),
        Command::VerifyLemmas(c) => (commands::verify_lemmas, c),
        Command::ValidatePressure(c) => (commands::validate_pressure, c),
        Command::ConvergenceStudy(c) => (commands::convergence_study, c),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let ctx = Context {
        config: common.config,
        out: common.out,
        overrides: Overrides {
            seed: common.seed,
            h0: common.h0,
            resolutions: common.resolutions,
        },
    };
    run(&ctx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(dir) => {
            println!("outputs in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
