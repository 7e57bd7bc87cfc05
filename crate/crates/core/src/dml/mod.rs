//! The cross-fitted double machine learning estimator: `K`-fold sample
//! splitting, Neyman-orthogonal density scores at derivative orders 0–2,
//! mode extraction and the equivalent-form variance estimators.

mod folds;
mod orthogonality;
mod score;

use rayon::prelude::*;

pub use folds::{make_folds, FoldPartition};
pub use orthogonality::{
    log_log_slope, orthogonality_check, OracleNuisance, OrthogonalityPoint, OrthogonalityProbe, ScoreForm,
};
pub use score::{orthogonal_score, Nuisance};

use crate::density::DensityCurve;
use crate::error::{MteError, Result};
use crate::kernel::{kernel_constants, BandwidthMethod, KernelFamily, KernelSpec, Order};
use crate::kernel_mte::{
    assemble_result, resolve_bandwidth, Bandwidth, Diagnostics, Estimate, GridSpec, Method, ModePair,
    VarianceComponents,
};
use crate::mode::mode_of_curve;
use crate::nuisance::{
    fit_propensity, fit_smoothed_outcome, OutcomeLearner, PropensityFit, PropensityLearner, SmoothedOutcomeFit,
};
use crate::num::{count, lit, Real};
use crate::sample::{Arm, Sample};
use score::{check_pi, score_from_kernel, variance_summand};

/// Number of partitions tried after the first when an auxiliary sample
/// lacks one arm.
pub const MAX_FOLD_RESEEDS: usize = 10;

/// Settings for [`estimate_dml_mte`].
#[derive(Debug, Clone, PartialEq)]
pub struct DmlConfig<T> {
    pub folds: usize,
    pub seed: u64,
    pub propensity: PropensityLearner,
    pub outcome: OutcomeLearner,
    pub kernel: KernelFamily,
    pub bandwidth: Bandwidth<T>,
    pub grid: GridSpec<T>,
    pub alpha: f64,
    /// Propensity clipping level, applied at prediction time.
    pub kappa: T,
}

impl<T: Real> Default for DmlConfig<T> {
    fn default() -> Self {
        DmlConfig {
            folds: 5,
            seed: 0,
            propensity: PropensityLearner::default(),
            outcome: OutcomeLearner::default(),
            kernel: KernelFamily::Gaussian,
            bandwidth: Bandwidth::Auto,
            grid: GridSpec::default(),
            alpha: 0.05,
            kappa: lit(0.01),
        }
    }
}

/// Nuisances fitted on one fold's auxiliary sample.
#[derive(Debug, Clone)]
pub struct FoldNuisance<T: Real> {
    pub pi: PropensityFit<T>,
    pub g1: SmoothedOutcomeFit<T>,
    pub g0: SmoothedOutcomeFit<T>,
}

impl<T: Real> FoldNuisance<T> {
    fn g(&self, arm: Arm) -> &SmoothedOutcomeFit<T> {
        match arm {
            Arm::Treated => &self.g1,
            Arm::Control => &self.g0,
        }
    }
}

/// Per-fold nuisances, indexed by fold label.
#[derive(Debug, Clone)]
pub struct NuisanceBundle<T: Real> {
    pub folds: Vec<FoldNuisance<T>>,
}

impl<T: Real> NuisanceBundle<T> {
    fn check(&self, sample: &Sample<T>, partition: &FoldPartition, grid: Option<&[T]>) -> Result<()> {
        if partition.len() != sample.len() {
            return Err(MteError::Configuration(format!(
                "partition covers {} observations, sample has {}",
                partition.len(),
                sample.len()
            )));
        }
        if self.folds.len() != partition.k() {
            return Err(MteError::Configuration(format!(
                "bundle has {} folds, partition has {}",
                self.folds.len(),
                partition.k()
            )));
        }
        if let Some(grid) = grid {
            for f in &self.folds {
                if f.g1.grid() != grid || f.g0.grid() != grid {
                    return Err(MteError::Configuration("grid does not match the smoothed outcome grid".into()));
                }
            }
        }
        Ok(())
    }
}

/// Fits the propensity and both smoothed outcome regressions (orders 0–2)
/// on each fold's auxiliary sample.
pub fn fit_nuisances<T: Real>(
    sample: &Sample<T>,
    partition: &FoldPartition,
    grid: &[T],
    spec: &KernelSpec<T>,
    config: &DmlConfig<T>,
) -> Result<NuisanceBundle<T>> {
    if partition.len() != sample.len() {
        return Err(MteError::Configuration("partition does not match the sample size".into()));
    }
    let folds = (0..partition.k())
        .into_par_iter()
        .map(|k| {
            let aux = sample.subset(&partition.complement(k));
            Ok(FoldNuisance {
                pi: fit_propensity(&aux, &config.propensity, config.kappa)?,
                g1: fit_smoothed_outcome(&aux, Arm::Treated, grid, spec, &config.outcome, &Order::ALL)?,
                g0: fit_smoothed_outcome(&aux, Arm::Control, grid, spec, &config.outcome, &Order::ALL)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NuisanceBundle { folds })
}

/// `(1/K) Σ_k (1/n_k) Σ_{i∈I_k} per_obs(fold, i)`, reduced in canonical
/// fold order.
fn cross_fit_mean<T: Real, F>(partition: &FoldPartition, per_obs: F) -> Result<T>
where
    F: Fn(usize, usize) -> Result<T>,
{
    let mut total = T::zero();
    for fold in partition.canonical_order() {
        let members = partition.members(fold);
        let mut acc = T::zero();
        for &i in &members {
            acc = acc + per_obs(fold, i)?;
        }
        total = total + acc / count(members.len());
    }
    Ok(total / count(partition.k()))
}

/// The cross-fitted density (or derivative) curve of one arm on the
/// nuisance grid. Order-0 values may dip below zero; they are kept as is.
pub fn dml_density_curve<T: Real>(
    sample: &Sample<T>,
    partition: &FoldPartition,
    bundle: &NuisanceBundle<T>,
    spec: &KernelSpec<T>,
    grid: &[T],
    arm: Arm,
    order: Order,
) -> Result<DensityCurve<T>> {
    bundle.check(sample, partition, Some(grid))?;
    let m = grid.len();
    let mut values = vec![T::zero(); m];
    let mut g_row = vec![T::zero(); m];
    let mut acc = vec![T::zero(); m];
    for fold in partition.canonical_order() {
        let nuisance = &bundle.folds[fold];
        let members = partition.members(fold);
        acc.iter_mut().for_each(|a| *a = T::zero());
        for &i in &members {
            let x = sample.row(i);
            let pi = nuisance.pi.predict(x);
            check_pi(pi, arm)?;
            nuisance.g(arm).predict_row_into(x, order, &mut g_row)?;
            let treated = sample.treated()[i];
            let own = arm.contains(treated);
            let yi = sample.y()[i];
            for j in 0..m {
                let kernel = if own { spec.scaled(grid[j] - yi, order) } else { T::zero() };
                acc[j] = acc[j] + score_from_kernel(kernel, treated, Nuisance { pi, g: g_row[j] }, arm);
            }
        }
        let n_k = count::<T>(members.len());
        for j in 0..m {
            values[j] = values[j] + acc[j] / n_k;
        }
    }
    let k = count::<T>(partition.k());
    for v in values.iter_mut() {
        *v = *v / k;
    }
    DensityCurve::new(grid.to_vec(), values, arm, order, *spec)
}

/// The cross-fitted curve at an arbitrary `y`: exact kernel term, linearly
/// interpolated smoothed outcome predictions.
pub fn dml_curve_at<T: Real>(
    sample: &Sample<T>,
    partition: &FoldPartition,
    bundle: &NuisanceBundle<T>,
    spec: &KernelSpec<T>,
    y: T,
    arm: Arm,
    order: Order,
) -> Result<T> {
    bundle.check(sample, partition, None)?;
    cross_fit_mean(partition, |fold, i| {
        let nuisance = &bundle.folds[fold];
        let x = sample.row(i);
        let pi = nuisance.pi.predict(x);
        check_pi(pi, arm)?;
        let g = nuisance.g(arm).predict_at(x, y, order)?;
        let treated = sample.treated()[i];
        let kernel = if arm.contains(treated) { spec.scaled(y - sample.y()[i], order) } else { T::zero() };
        Ok(score_from_kernel(kernel, treated, Nuisance { pi, g }, arm))
    })
}

/// Cross-fitted `M̂₁, M̂₀, V̂₁, V̂₀` at the given modes.
///
/// `M̂` is the order-2 orthogonal score average. `V̂₁` averages
/// `D K_h(θ₁ - Y)/π² - 2 (D - π)/π² · ĝ₁` (control analogue with `1 - π`
/// and `π - D`) and is scaled by `κ₀⁽¹⁾`.
pub fn dml_variance_components<T: Real>(
    sample: &Sample<T>,
    partition: &FoldPartition,
    bundle: &NuisanceBundle<T>,
    spec: &KernelSpec<T>,
    theta1: T,
    theta0: T,
) -> Result<VarianceComponents<T>> {
    let kappa = kernel_constants::<T>(spec.family()).kappa0_1;
    let m1 = dml_curve_at(sample, partition, bundle, spec, theta1, Arm::Treated, Order::Second)?;
    let m0 = dml_curve_at(sample, partition, bundle, spec, theta0, Arm::Control, Order::Second)?;
    let v = |theta: T, arm: Arm| {
        cross_fit_mean(partition, |fold, i| {
            let nuisance = &bundle.folds[fold];
            let x = sample.row(i);
            let pi = nuisance.pi.predict(x);
            check_pi(pi, arm)?;
            let g = nuisance.g(arm).predict_at(x, theta, Order::Zero)?;
            let treated = sample.treated()[i];
            let kernel =
                if arm.contains(treated) { spec.scaled(theta - sample.y()[i], Order::Zero) } else { T::zero() };
            Ok(variance_summand(kernel, treated, Nuisance { pi, g }, arm))
        })
    };
    Ok(VarianceComponents { m1, m0, v1: kappa * v(theta1, Arm::Treated)?, v0: kappa * v(theta0, Arm::Control)? })
}

fn auxiliary_samples_have_both_arms<T: Real>(sample: &Sample<T>, partition: &FoldPartition) -> bool {
    (0..partition.k()).all(|k| {
        let aux = partition.complement(k);
        let treated = aux.iter().filter(|&&i| sample.treated()[i]).count();
        treated > 0 && treated < aux.len()
    })
}

fn reseed(seed: u64, attempt: u64) -> u64 {
    let mut z = seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Partition with both arms in every auxiliary sample, trying up to
/// [`MAX_FOLD_RESEEDS`] fresh seeds. Returns the partition and the number of
/// re-seeds used.
pub fn partition_with_overlap<T: Real>(sample: &Sample<T>, k: usize, seed: u64) -> Result<(FoldPartition, usize)> {
    for attempt in 0..=MAX_FOLD_RESEEDS {
        let s = if attempt == 0 { seed } else { reseed(seed, attempt as u64) };
        let partition = make_folds(sample.len(), k, s)?;
        if auxiliary_samples_have_both_arms(sample, &partition) {
            return Ok((partition, attempt));
        }
    }
    Err(MteError::Stratification { attempts: MAX_FOLD_RESEEDS + 1 })
}

/// Cross-fitted estimate of `θ₁`, `θ₀` and `Δ` with standard errors at the
/// `√(N h³)` rate.
pub fn estimate_dml_mte<T: Real>(sample: &Sample<T>, config: &DmlConfig<T>) -> Result<Estimate<T>> {
    validate_config(sample, config)?;
    let (partition, reseeds) = partition_with_overlap(sample, config.folds, config.seed)?;
    let mut estimate = estimate_dml_with_partition(sample, &partition, config)?;
    estimate.result.diagnostics.fold_reseeds = reseeds;
    Ok(estimate)
}

fn validate_config<T: Real>(sample: &Sample<T>, config: &DmlConfig<T>) -> Result<()> {
    sample.require_both_arms()?;
    if config.folds < 2 || config.folds > sample.len() {
        return Err(MteError::InvalidArgument(format!(
            "need 2 <= K <= N, got K = {}, N = {}",
            config.folds,
            sample.len()
        )));
    }
    if !(config.kappa > T::zero() && config.kappa < lit(0.5)) {
        return Err(MteError::InvalidArgument(format!("kappa must lie in (0, 0.5), got {}", config.kappa)));
    }
    Ok(())
}

/// As [`estimate_dml_mte`] with a caller-supplied partition; the fold
/// count in `config` is ignored.
pub fn estimate_dml_with_partition<T: Real>(
    sample: &Sample<T>,
    partition: &FoldPartition,
    config: &DmlConfig<T>,
) -> Result<Estimate<T>> {
    sample.require_both_arms()?;
    if partition.len() != sample.len() {
        return Err(MteError::Configuration("partition does not match the sample size".into()));
    }
    if !auxiliary_samples_have_both_arms(sample, partition) {
        return Err(MteError::Stratification { attempts: 1 });
    }
    let n = sample.len();
    let mut diagnostics = Diagnostics::default();
    let h = resolve_bandwidth(
        &config.bandwidth,
        sample.y(),
        n,
        sample.dim(),
        BandwidthMethod::Dml,
        &mut diagnostics.warnings,
    )?;
    let spec = KernelSpec::new(config.kernel, h)?;
    let grid = config.grid.resolve(sample.y(), h)?;
    let bundle = fit_nuisances(sample, partition, &grid, &spec, config)?;

    let treated_curve = dml_density_curve(sample, partition, &bundle, &spec, &grid, Arm::Treated, Order::Zero)?;
    let control_curve = dml_density_curve(sample, partition, &bundle, &spec, &grid, Arm::Control, Order::Zero)?;
    let locate = |curve: &DensityCurve<T>, arm: Arm| {
        let at = |y: T, order: Order| {
            dml_curve_at(sample, partition, &bundle, &spec, y, arm, order).unwrap_or_else(|_| T::nan())
        };
        mode_of_curve(curve, |y| at(y, Order::Zero), Some(|y| at(y, Order::First)))
    };
    let modes =
        ModePair { treated: locate(&treated_curve, Arm::Treated)?, control: locate(&control_curve, Arm::Control)? };
    let vc = dml_variance_components(sample, partition, &bundle, &spec, modes.treated.theta, modes.control.theta)?;
    let result =
        assemble_result(Method::Dml, config.kernel, n, h, Some(partition.k()), config.alpha, &modes, vc, diagnostics)?;
    Ok(Estimate { result, treated_curve, control_curve })
}

#[cfg(test)]
mod tests;
