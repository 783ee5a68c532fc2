//! Numerical laboratory for the compressible Brinkman system
//! `∂tρ + div(ρu) = α_k Δρ`, `-μΔu + αu + ∇P(ρ) = S` on the unit torus,
//! with general (possibly non-monotone) barotropic pressure laws.
//!
//! Module map:
//! - [`fields`]: grids, fields, spectral operators, snapshot files.
//! - [`pressure`]: pressure laws, internal energy, truncation, validation.
//! - [`harmonic`]: singular kernels, maximal operator, `D_h`, lemma verifiers.
//! - [`weights`]: damping field, damped transport of the weight, log budget.
//! - [`solver`]: operator-split time integration and energy bookkeeping.
//! - [`diagnostics`]: weighted/unweighted moduli, de-weighting bound,
//!   commutator check, extra integrability, refinement studies.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod harmonic;
pub mod pressure;
pub(crate) mod quadrature;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use fields::{Norm, PeriodicGrid, ScalarField, VectorField};
