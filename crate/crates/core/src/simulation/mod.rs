//! Data-generating processes with known modes, the numerical mode oracle and
//! the Monte Carlo harness.

mod dgp;
mod monte_carlo;
mod oracle;

pub use dgp::{generate, ArmLaw, DgpSpec, LogitPropensity, MixtureComponent, NoiseFamily, OutcomeLaw};
pub use monte_carlo::{
    rep_seed, run_monte_carlo, EstimatorConfig, MonteCarloReport, RepEstimate, RepRecord, TargetSummary,
};
pub use oracle::{numerical_true_mode, true_delta, true_mode};
