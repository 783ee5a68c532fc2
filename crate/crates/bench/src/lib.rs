//! Benchmark fixtures shared by the criterion targets.

use brinkman_core::solver::{initial_state, scenarios, SimConfig, SimState};
use brinkman_core::PeriodicGrid;

/// Advected-bump configuration and its initial state on a `dim`-d grid of side `n`.
pub fn bump_state(dim: usize, n: usize) -> (SimConfig, SimState) {
    let g = PeriodicGrid::new(dim, n).expect("power-of-two grid");
    let cfg = scenarios::advected_bump(g).expect("fixture");
    let state = initial_state(&cfg).expect("initial state");
    (cfg, state)
}
