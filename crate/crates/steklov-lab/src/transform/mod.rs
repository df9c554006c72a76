//! Transformation-operator kernels, the B and D operators built from them,
//! Neumann-series inversion, and the integral identities tying Weyl-function
//! gaps to potential gaps.

mod identities;
mod kernel;
mod operators;

pub use identities::{integral_identity_residual, IdentityResiduals};
pub use kernel::{
    half_integral, represent, representation_check, solve_kernel, KernelGrid, DEFAULT_GRID,
    DEFAULT_TOL,
};
pub use operators::{
    b_identity_residual, build_b, build_d, build_q, build_r, d_identity_residual, invert_b,
    l2_norm, IntegralOperator, InversionReport, OperatorKind,
};
