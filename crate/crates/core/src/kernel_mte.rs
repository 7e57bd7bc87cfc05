//! The kernel estimator of the mode treatment effect and its plug-in
//! sandwich variance.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{default_grid, validate_grid, DensityCurve, LocalWeights, DEFAULT_GRID_POINTS};
use crate::error::{MteError, Result};
use crate::kernel::{default_bandwidth, kernel_constants, BandwidthMethod, KernelFamily, KernelSpec, Order};
use crate::mode::{mode_of_curve, ModeLocation};
use crate::normal::two_sided_critical;
use crate::nuisance::clip_propensity;
use crate::num::{count, lit, robust_dispersion, to_f64, Real};
use crate::sample::{standardize_covariates, Arm, Sample};

/// Estimator that produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kernel,
    Dml,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Kernel => "kernel",
            Method::Dml => "dml",
        }
    }
}

/// Bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth<T> {
    /// `min(sd, IQR/1.349) · n^(-r)` with the estimator's rate exponent.
    Auto,
    Fixed(T),
}

/// Mode-search grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridSpec<T> {
    /// Equally spaced points over `[min(Y) - h, max(Y) + h]`.
    Auto {
        points: usize,
    },
    Explicit(Vec<T>),
}

impl<T> Default for GridSpec<T> {
    fn default() -> Self {
        GridSpec::Auto { points: DEFAULT_GRID_POINTS }
    }
}

impl<T: Real> GridSpec<T> {
    pub(crate) fn resolve(&self, y: &[T], h: T) -> Result<Vec<T>> {
        match self {
            GridSpec::Auto { points } => default_grid(y, h, *points),
            GridSpec::Explicit(grid) => {
                validate_grid(grid)?;
                Ok(grid.clone())
            }
        }
    }
}

/// Propensity evaluated on the caller's (unstandardized) covariate row.
pub type PropensityFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Borrowed propensity evaluated on a covariate row.
pub type PropensityRef<'a, T> = &'a dyn Fn(&[T]) -> T;

/// Settings for [`estimate_kernel_mte`].
#[derive(Clone)]
pub struct KernelMteConfig<T> {
    pub kernel: KernelFamily,
    pub bandwidth: Bandwidth<T>,
    pub grid: GridSpec<T>,
    pub alpha: f64,
    /// Clipping level for the propensity in the variance plug-in.
    pub kappa: T,
    /// Propensity used by the variance plug-in; `None` uses the
    /// Nadaraya–Watson regression of `D` on `X` with the estimator's own
    /// kernel and bandwidth.
    pub propensity: Option<PropensityFn<T>>,
}

impl<T: Real> Default for KernelMteConfig<T> {
    fn default() -> Self {
        KernelMteConfig {
            kernel: KernelFamily::Gaussian,
            bandwidth: Bandwidth::Auto,
            grid: GridSpec::default(),
            alpha: 0.05,
            kappa: lit(0.01),
            propensity: None,
        }
    }
}

impl<T: Real> std::fmt::Debug for KernelMteConfig<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelMteConfig")
            .field("kernel", &self.kernel)
            .field("bandwidth", &self.bandwidth)
            .field("grid", &self.grid)
            .field("alpha", &self.alpha)
            .field("kappa", &self.kappa)
            .field("propensity", &self.propensity.as_ref().map(|_| "custom"))
            .finish()
    }
}

/// Curvature and score-variance components of the sandwich `M⁻¹ V M⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents<T> {
    pub m1: T,
    pub m0: T,
    pub v1: T,
    pub v0: T,
}

/// Sign of the estimated curvature terms; both should be negative at an
/// interior maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureSign {
    Negative,
    Nonnegative,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub flat_curve: bool,
    pub multimodal_curve: bool,
    pub m_hat_sign: Option<CurvatureSign>,
    /// First derivative of each arm's density at its estimated mode
    /// (treated, control).
    pub foc_residuals: Option<(f64, f64)>,
    pub fold_reseeds: usize,
    pub warnings: Vec<String>,
}

/// Point estimates, sandwich components, standard errors and intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MteResult<T> {
    pub method: Method,
    pub kernel: KernelFamily,
    pub n: usize,
    pub h: T,
    pub folds: Option<usize>,
    pub alpha: f64,
    pub theta1: T,
    pub theta0: T,
    pub delta: T,
    pub m1_hat: T,
    pub m0_hat: T,
    pub v1_hat: T,
    pub v0_hat: T,
    pub se1: T,
    pub se0: T,
    pub se_delta: T,
    pub ci1: (T, T),
    pub ci0: (T, T),
    pub ci_delta: (T, T),
    pub diagnostics: Diagnostics,
}

/// A fitted result together with the order-0 density curves it was read from.
#[derive(Debug, Clone)]
pub struct Estimate<T> {
    pub result: MteResult<T>,
    pub treated_curve: DensityCurve<T>,
    pub control_curve: DensityCurve<T>,
}

pub(crate) fn auto_bandwidth<T: Real>(
    y: &[T],
    n: usize,
    dim: usize,
    method: BandwidthMethod,
    warnings: &mut Vec<String>,
) -> Result<T> {
    let scale = robust_dispersion(y);
    if !(scale > T::zero()) {
        return Err(MteError::InvalidArgument("outcome has zero dispersion; cannot choose a bandwidth".into()));
    }
    let choice = default_bandwidth(n, dim, method, scale)?;
    if let Some(w) = choice.warning {
        warnings.push(w);
    }
    Ok(choice.h)
}

pub(crate) fn resolve_bandwidth<T: Real>(
    bandwidth: &Bandwidth<T>,
    y: &[T],
    n: usize,
    dim: usize,
    method: BandwidthMethod,
    warnings: &mut Vec<String>,
) -> Result<T> {
    match *bandwidth {
        Bandwidth::Auto => auto_bandwidth(y, n, dim, method, warnings),
        Bandwidth::Fixed(h) => {
            if !(h.is_finite() && h > T::zero()) {
                return Err(MteError::InvalidArgument(format!("bandwidth must be positive, got {h}")));
            }
            Ok(h)
        }
    }
}

pub(crate) struct ModePair<T> {
    pub treated: ModeLocation<T>,
    pub control: ModeLocation<T>,
}

/// Turns modes and sandwich components into standard errors and intervals.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_result<T: Real>(
    method: Method,
    kernel: KernelFamily,
    n: usize,
    h: T,
    folds: Option<usize>,
    alpha: f64,
    modes: &ModePair<T>,
    vc: VarianceComponents<T>,
    mut diagnostics: Diagnostics,
) -> Result<MteResult<T>> {
    let z: T = lit(two_sided_critical(alpha)?);
    let rate = count::<T>(n) * h.powi(3);
    let se = |m: T, v: T, arm: Arm| -> Result<T> {
        if !(m.is_finite() && m != T::zero()) {
            return Err(MteError::InvalidCurve(format!(
                "curvature estimate for arm {} is {m}; the sandwich variance is undefined",
                arm.label()
            )));
        }
        if !(v.is_finite() && v > T::zero()) {
            return Err(MteError::InvalidCurve(format!(
                "score variance estimate for arm {} is {v}; expected a positive value",
                arm.label()
            )));
        }
        Ok((v / (m * m * rate)).sqrt())
    };
    let se1 = se(vc.m1, vc.v1, Arm::Treated)?;
    let se0 = se(vc.m0, vc.v0, Arm::Control)?;
    let se_delta = (se1 * se1 + se0 * se0).sqrt();
    let theta1 = modes.treated.theta;
    let theta0 = modes.control.theta;
    let delta = theta1 - theta0;
    let interval = |c: T, s: T| (c - z * s, c + z * s);

    let sign = if vc.m1 < T::zero() && vc.m0 < T::zero() {
        CurvatureSign::Negative
    } else {
        for (m, arm) in [(vc.m1, Arm::Treated), (vc.m0, Arm::Control)] {
            if m >= T::zero() {
                diagnostics.warnings.push(format!(
                    "arm {} curvature estimate {} is not negative; the mode may not be an interior maximum",
                    arm.label(),
                    m
                ));
            }
        }
        CurvatureSign::Nonnegative
    };
    diagnostics.m_hat_sign = Some(sign);
    diagnostics.flat_curve = modes.treated.flat || modes.control.flat;
    diagnostics.multimodal_curve = modes.treated.multimodal || modes.control.multimodal;
    for (loc, arm) in [(&modes.treated, Arm::Treated), (&modes.control, Arm::Control)] {
        if loc.flat {
            diagnostics.warnings.push(format!("arm {} density curve is flat on the grid", arm.label()));
        } else if loc.multimodal {
            diagnostics.warnings.push(format!("arm {} density curve has several pronounced modes", arm.label()));
        }
    }
    if let (Some(a), Some(b)) = (modes.treated.foc_residual, modes.control.foc_residual) {
        diagnostics.foc_residuals = Some((to_f64(a), to_f64(b)));
    }

    Ok(MteResult {
        method,
        kernel,
        n,
        h,
        folds,
        alpha,
        theta1,
        theta0,
        delta,
        m1_hat: vc.m1,
        m0_hat: vc.m0,
        v1_hat: vc.v1,
        v0_hat: vc.v0,
        se1,
        se0,
        se_delta,
        ci1: interval(theta1, se1),
        ci0: interval(theta0, se0),
        ci_delta: interval(delta, se_delta),
        diagnostics,
    })
}

/// Checks a clipped propensity lies strictly inside `(0, 1)`.
fn checked_probability<T: Real>(p: T, arm: Arm, i: usize) -> Result<T> {
    if p > T::zero() && p < T::one() {
        Ok(p)
    } else {
        Err(MteError::InvariantViolation(format!(
            "propensity for arm {} at observation {i} is {p} after clipping",
            arm.label()
        )))
    }
}

/// Plug-in sandwich components from precomputed covariate weights.
///
/// `arm_probability(arm, i)` is the clipped probability of `arm` at `Xᵢ`.
fn variance_from_weights<T: Real>(
    sample: &Sample<T>,
    spec: &KernelSpec<T>,
    weights: &LocalWeights<T>,
    thetas: [T; 2],
    arm_probability: &dyn Fn(Arm, usize) -> T,
) -> Result<VarianceComponents<T>> {
    let n = sample.len();
    let treated = sample.treated();
    let kappa = kernel_constants::<T>(spec.family()).kappa0_1;
    // Outcome kernels at each arm's mode, for order 0 (V) and order 2 (M).
    let mut k0 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    for j in 0..n {
        let arm = Arm::from_indicator(treated[j]);
        let d = thetas[arm.index()] - sample.y()[j];
        k0[j] = spec.scaled(d, Order::Zero);
        k2[j] = spec.scaled(d, Order::Second);
    }
    let mut m_sum = [T::zero(); 2];
    let mut v_sum = [T::zero(); 2];
    for i in 0..n {
        let xi = sample.row(i);
        let mut num0 = [T::zero(); 2];
        let mut num2 = [T::zero(); 2];
        for j in 0..n {
            let w = spec.product_between(xi, sample.row(j));
            let a = Arm::from_indicator(treated[j]).index();
            num0[a] = num0[a] + w * k0[j];
            num2[a] = num2[a] + w * k2[j];
        }
        for arm in Arm::BOTH {
            let a = arm.index();
            let den = weights.denominators[a][i];
            let p = checked_probability(arm_probability(arm, i), arm, i)?;
            m_sum[a] = m_sum[a] + num2[a] / den;
            v_sum[a] = v_sum[a] + (num0[a] / den) / p;
        }
    }
    let n_t = count::<T>(n);
    Ok(VarianceComponents {
        m1: m_sum[1] / n_t,
        m0: m_sum[0] / n_t,
        v1: kappa * v_sum[1] / n_t,
        v0: kappa * v_sum[0] / n_t,
    })
}

/// Plug-in estimates of `M₁, M₀, V₁, V₀` at the given modes.
///
/// `M̂` averages the second `y`-derivative of the conditional density over
/// all `Xᵢ`; `V̂₁` divides by `π̂(Xᵢ)` and `V̂₀` by `1 - π̂(Xᵢ)`. With
/// `pi_hat = None` the propensity is the Nadaraya–Watson regression of `D`
/// on `X` with the same kernel. Propensities are clipped to
/// `[kappa, 1 - kappa]`.
pub fn kernel_variance_components<T: Real>(
    sample: &Sample<T>,
    spec: &KernelSpec<T>,
    theta1: T,
    theta0: T,
    pi_hat: Option<PropensityRef<'_, T>>,
    kappa: T,
) -> Result<VarianceComponents<T>> {
    sample.require_both_arms()?;
    let weights = LocalWeights::compute(sample, spec, &Arm::BOTH)?;
    let probability = |arm: Arm, i: usize| -> T {
        match pi_hat {
            Some(f) => {
                let p = clip_propensity(f(sample.row(i)), kappa);
                if arm == Arm::Treated {
                    p
                } else {
                    T::one() - p
                }
            }
            None => clip_propensity(weights.arm_probability(arm, i), kappa),
        }
    };
    variance_from_weights(sample, spec, &weights, [theta0, theta1], &probability)
}

/// Kernel estimate of `θ₁`, `θ₀` and `Δ = θ₁ - θ₀` with sandwich standard
/// errors and normal confidence intervals at level `1 - alpha`.
///
/// Covariates are standardized first so one bandwidth serves every
/// coordinate.
pub fn estimate_kernel_mte<T: Real>(sample: &Sample<T>, config: &KernelMteConfig<T>) -> Result<Estimate<T>> {
    sample.require_both_arms()?;
    if !(config.kappa > T::zero() && config.kappa < lit(0.5)) {
        return Err(MteError::InvalidArgument(format!("kappa must lie in (0, 0.5), got {}", config.kappa)));
    }
    let n = sample.len();
    let (std_sample, _) = standardize_covariates(sample)?;
    let mut diagnostics = Diagnostics::default();
    let h = resolve_bandwidth(
        &config.bandwidth,
        sample.y(),
        n,
        sample.dim(),
        BandwidthMethod::KernelMte,
        &mut diagnostics.warnings,
    )?;
    let spec = KernelSpec::new(config.kernel, h)?;
    let grid = config.grid.resolve(sample.y(), h)?;

    let weights = LocalWeights::compute(&std_sample, &spec, &Arm::BOTH)?;
    let treated = weights.marginal(&std_sample, &spec, Arm::Treated);
    let control = weights.marginal(&std_sample, &spec, Arm::Control);
    let treated_curve = treated.curve(&grid, Order::Zero)?;
    let control_curve = control.curve(&grid, Order::Zero)?;
    let locate = |curve: &DensityCurve<T>, m: &crate::density::KernelMarginal<T>| {
        mode_of_curve(curve, |y| m.eval(y, Order::Zero), Some(|y| m.eval(y, Order::First)))
    };
    let modes = ModePair { treated: locate(&treated_curve, &treated)?, control: locate(&control_curve, &control)? };

    let kappa = config.kappa;
    let probability = |arm: Arm, i: usize| -> T {
        match &config.propensity {
            Some(f) => {
                let p = clip_propensity(f(sample.row(i)), kappa);
                if arm == Arm::Treated {
                    p
                } else {
                    T::one() - p
                }
            }
            None => clip_propensity(weights.arm_probability(arm, i), kappa),
        }
    };
    let vc =
        variance_from_weights(&std_sample, &spec, &weights, [modes.control.theta, modes.treated.theta], &probability)?;
    let result = assemble_result(Method::Kernel, config.kernel, n, h, None, config.alpha, &modes, vc, diagnostics)?;
    Ok(Estimate { result, treated_curve, control_curve })
}
