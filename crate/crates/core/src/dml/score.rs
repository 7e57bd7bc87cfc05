use crate::error::{MteError, Result};
use crate::kernel::{KernelSpec, Order};
use crate::num::{lit, Real};
use crate::sample::Arm;

/// Nuisance values at one observation: the propensity `π(x)` and the
/// smoothed outcome prediction `g(x; y)` of the matching order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nuisance<T> {
    pub pi: T,
    pub g: T,
}

fn indicator<T: Real>(d: bool) -> T {
    if d {
        T::one()
    } else {
        T::zero()
    }
}

/// Admissible propensity for the arm's score: `(0, 1]` for the treated
/// score, `[0, 1)` for the control score.
pub(crate) fn check_pi<T: Real>(pi: T, arm: Arm) -> Result<()> {
    let ok = match arm {
        Arm::Treated => pi > T::zero() && pi <= T::one(),
        Arm::Control => pi >= T::zero() && pi < T::one(),
    };
    if ok {
        Ok(())
    } else {
        Err(MteError::InvariantViolation(format!(
            "propensity {pi} is outside the admissible range for arm {}",
            arm.label()
        )))
    }
}

/// Score value given the kernel term `K_h⁽ˢ⁾(y - Y)`; the kernel term is
/// only read when the observation belongs to `arm`.
#[inline]
pub(crate) fn score_from_kernel<T: Real>(kernel: T, treated: bool, eta: Nuisance<T>, arm: Arm) -> T {
    let d: T = indicator(treated);
    let Nuisance { pi, g } = eta;
    match arm {
        Arm::Treated => {
            let direct = if treated { kernel / pi } else { T::zero() };
            direct - (d - pi) / pi * g
        }
        Arm::Control => {
            let q = T::one() - pi;
            let direct = if treated { T::zero() } else { kernel / q };
            direct - (pi - d) / q * g
        }
    }
}

/// Summand of the equivalent-form score variance (before `κ₀⁽¹⁾`):
/// `D K/π² - 2 (D - π)/π² · g` and its control analogue.
#[inline]
pub(crate) fn variance_summand<T: Real>(kernel: T, treated: bool, eta: Nuisance<T>, arm: Arm) -> T {
    let d: T = indicator(treated);
    let two: T = lit(2.0);
    let Nuisance { pi, g } = eta;
    match arm {
        Arm::Treated => {
            let p2 = pi * pi;
            let direct = if treated { kernel / p2 } else { T::zero() };
            direct - two * (d - pi) / p2 * g
        }
        Arm::Control => {
            let q = T::one() - pi;
            let q2 = q * q;
            let direct = if treated { T::zero() } else { kernel / q2 };
            direct - two * (pi - d) / q2 * g
        }
    }
}

/// Neyman-orthogonal density score at `y` for one observation.
///
/// Treated: `D K_h⁽ˢ⁾(y - Y)/π - (D - π)/π · g`.
/// Control: `(1 - D) K_h⁽ˢ⁾(y - Y)/(1 - π) - (π - D)/(1 - π) · g`.
pub fn orthogonal_score<T: Real>(
    y_obs: T,
    treated: bool,
    y: T,
    eta: Nuisance<T>,
    arm: Arm,
    spec: &KernelSpec<T>,
    order: Order,
) -> Result<T> {
    check_pi(eta.pi, arm)?;
    if !eta.g.is_finite() || !y.is_finite() || !y_obs.is_finite() {
        return Err(MteError::InvariantViolation("score inputs must be finite".into()));
    }
    let kernel = if arm.contains(treated) { spec.scaled(y - y_obs, order) } else { T::zero() };
    Ok(score_from_kernel(kernel, treated, eta, arm))
}
