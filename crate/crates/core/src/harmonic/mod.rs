//! Harmonic-analysis toolbox: singular kernels, the localized maximal
//! operator, the averaged-gradient operator `D_h`, and lemma verifiers.

mod dh;
mod kernel;
mod lemmas;
mod maximal;

pub use dh::{dh_mass, dh_op, dh_weights};
pub use kernel::{
    cell_integrals, integrated_kernel, kernel_field, kernel_l1, kernel_profile,
    kernel_profile_derivative, log_gradient_ratio, log_nodes, normalized_kernel, KernelScale,
    KernelSpec, KernelWeights, DEFAULT_NODES,
};
pub use lemmas::{
    compare_dh_max, fit_slope, square_function_profile, square_function_stat,
    verify_pointwise_lemma, DhMaxScan, PointwiseLemmaReport, SquareFunctionPoint,
};
pub use maximal::{dyadic_radii, maximal_op};
