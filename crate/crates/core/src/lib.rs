//! Estimation and inference for the mode treatment effect: the difference
//! between the modes of the treated and untreated potential-outcome
//! distributions under unconfoundedness.
//!
//! Two estimators are provided:
//!
//! * [`kernel_mte`]: Nadaraya–Watson conditional densities averaged over the
//!   covariate distribution, with plug-in sandwich variances.
//! * [`dml`]: cross-fitted Neyman-orthogonal density scores with pluggable
//!   machine-learning nuisances.
//!
//! Both report standard errors at the `√(n h³)` rate. The [`simulation`]
//! module holds data-generating processes with known modes and a Monte Carlo
//! harness. Everything numeric is generic over [`Real`]; the `*64` aliases
//! below fix the scalar to `f64`.

pub mod density;
pub mod dml;
pub mod error;
pub mod kernel;
pub mod kernel_mte;
pub mod mode;
pub mod normal;
pub mod nuisance;
pub mod num;
pub mod quadrature;
pub mod sample;
pub mod simulation;

pub use density::{cond_density_at, default_grid, marginal_density_curve, DensityCurve, KernelMarginal};
pub use dml::{estimate_dml_mte, make_folds, orthogonal_score, DmlConfig, FoldPartition};
pub use error::{MteError, Result};
pub use kernel::{
    default_bandwidth, eval_kernel, kernel_constants, product_kernel, scaled_kernel, BandwidthMethod, KernelConstants,
    KernelFamily, KernelSpec, Order,
};
pub use kernel_mte::{
    estimate_kernel_mte, kernel_variance_components, Bandwidth, Diagnostics, Estimate, GridSpec, KernelMteConfig,
    Method, MteResult, VarianceComponents,
};
pub use mode::{argmax_on_grid, mode_of_curve, refine_mode, ModeLocation};
pub use num::Real;
pub use sample::{standardize_covariates, Arm, Sample, Standardization};

pub type Sample64 = Sample<f64>;
pub type Sample32 = Sample<f32>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type DensityCurve64 = DensityCurve<f64>;
pub type MteResult64 = MteResult<f64>;
pub type Estimate64 = Estimate<f64>;
pub type KernelMteConfig64 = KernelMteConfig<f64>;
pub type DmlConfig64 = DmlConfig<f64>;
