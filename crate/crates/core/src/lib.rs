//! Numerics for sub-Laplacians on two-step stratified Lie groups: group
//! construction and classification, spectral analysis of the central matrix
//! family, Laguerre-expansion evaluation of localized multiplier kernels,
//! and the experiment harness validating the Plancherel and localization
//! behavior behind the multiplier estimates.

pub mod caps;
pub mod error;
pub mod exponents;
pub mod grid;
pub mod group;
pub mod kernel;
pub mod multiplier;
pub mod quadrature;
pub mod specfun;
pub mod spectral;
pub mod sphere;
pub mod verify;

pub use caps::{cap_partition, CapPartition};
pub use error::{Error, Result};
pub use exponents::{critical_exponent, exponents, ExponentTable};
pub use grid::{convolve, Axis, GridFunction};
pub use group::{
    builtin_group, homogeneous_norm, parse_group_spec, BuiltinFamily, GroupPoint, TwoStepGroup,
};
pub use kernel::{
    admissible_k_lists, eigvp, evaluate_kernel, min_scale_ell0, KernelSample, QuadratureSpec,
};
pub use multiplier::{dyadic_multiplier_pieces, BandSplitConfig, Multiplier, ScalePartition};
pub use specfun::{hermite_apply, laguerre_norm_sq, laguerre_phi, LaguerreParams};
pub use spectral::{
    block_spectral_decompose, check_assumption_a, check_assumption_b, classify_group, j_matrix,
    kernel_projection, projection_lipschitz_constant, spectral_decompose, AssumptionReport,
    Classification, SpectralDecomposition,
};
