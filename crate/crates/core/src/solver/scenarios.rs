//! Ready-made configurations used by tests, benches and the CLI.

use super::{Envelope, InitialDensity, SimConfig, Source, SourceTerm};
use crate::error::Result;
use crate::fields::PeriodicGrid;
use crate::pressure::{Law, PressureLaw};

/// Constant density, no source: every substep is a fixed point.
pub fn stationary(grid: PeriodicGrid, rho0: f64, law: impl Into<Law>) -> Result<SimConfig> {
    Ok(SimConfig::new(InitialDensity::Constant { value: rho0 }.field(grid)?, law))
}

/// Gaussian bump `1 + 0.5 exp(−r²/(2·0.08²))` carried by the uniform source
/// `S = α·(0.5, 0)`; `γ = 2` law, `α_k = 1e-3`.
pub fn advected_bump(grid: PeriodicGrid) -> Result<SimConfig> {
    let rho0 = InitialDensity::Bump {
        base: 1.0,
        amplitude: 0.5,
        width: 0.08,
        center: [0.5, 0.5],
    }
    .field(grid)?;
    let mut cfg = SimConfig::new(rho0, PressureLaw::gamma_law(2.0)?);
    cfg.source = Source::uniform([0.5 * cfg.alpha, 0.0]);
    cfg.alpha_k = 1e-3;
    cfg.dt = 0.25 / grid.n() as f64;
    cfg.t_end = 0.5;
    Ok(cfg)
}

/// Two bumps in the decreasing range of `nonmonotone_wave(2, 0.5, 8)`,
/// driven by an oscillating single-mode source.
pub fn nonmonotone(grid: PeriodicGrid) -> Result<SimConfig> {
    let rho0 = InitialDensity::Modes(crate::fields::modes::ModeSum {
        offset: 1.6,
        modes: vec![
            crate::fields::modes::Mode {
                k: [1, 0],
                cos: 0.3,
                sin: 0.0,
            },
            crate::fields::modes::Mode {
                k: [2, 0],
                cos: 0.0,
                sin: 0.15,
            },
        ],
    })
    .field(grid)?;
    let mut cfg = SimConfig::new(rho0, PressureLaw::nonmonotone_wave(2.0, 0.5, 8.0)?);
    cfg.source = Source::zero().with_term(SourceTerm {
        component: 0,
        k: [1, 0],
        cos: 0.0,
        sin: 2.0,
        envelope: Envelope::Sin {
            omega: 6.0,
            phase: 0.0,
        },
    });
    cfg.alpha_k = 1e-3;
    cfg.dt = 0.25 / grid.n() as f64;
    cfg.t_end = 0.5;
    Ok(cfg)
}
