use serde::{Deserialize, Serialize};

use super::score::{check_pi, score_from_kernel, Nuisance};
use crate::error::Result;
use crate::kernel::{KernelSpec, Order};
use crate::num::{count, Real};
use crate::sample::{Arm, Sample};

/// Which moment the check perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreForm {
    /// The orthogonal score with its propensity-weighted correction term.
    Orthogonal,
    /// The inverse-propensity kernel term `D K_h⁽ˢ⁾(y - Y)/π` alone.
    Naive,
}

/// A pair of functions standing for `(π, g)`: either the true nuisances or
/// a perturbation direction.
pub struct OracleNuisance<'a, T> {
    pub pi: &'a (dyn Fn(&[T]) -> T + Sync),
    pub g: &'a (dyn Fn(&[T], T, Order) -> T + Sync),
}

/// Where the score is evaluated.
#[derive(Debug, Clone, Copy)]
pub struct OrthogonalityProbe<T> {
    pub y: T,
    pub arm: Arm,
    pub spec: KernelSpec<T>,
    pub order: Order,
    pub form: ScoreForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityPoint<T> {
    pub epsilon: T,
    pub shift: T,
}

/// For each `ε`, the absolute difference between the sample mean of the
/// score at `η₀ + ε·direction` and at `η₀`.
pub fn orthogonality_check<T: Real>(
    sample: &Sample<T>,
    truth: &OracleNuisance<'_, T>,
    direction: &OracleNuisance<'_, T>,
    epsilons: &[T],
    probe: &OrthogonalityProbe<T>,
) -> Result<Vec<OrthogonalityPoint<T>>> {
    let n = sample.len();
    let mut base = Vec::with_capacity(n);
    let mut dir = Vec::with_capacity(n);
    let mut kernel = Vec::with_capacity(n);
    for i in 0..n {
        let x = sample.row(i);
        base.push(((truth.pi)(x), (truth.g)(x, probe.y, probe.order)));
        dir.push(((direction.pi)(x), (direction.g)(x, probe.y, probe.order)));
        let own = probe.arm.contains(sample.treated()[i]);
        kernel.push(if own { probe.spec.scaled(probe.y - sample.y()[i], probe.order) } else { T::zero() });
    }
    let mean_at = |eps: T| -> Result<T> {
        let mut acc = T::zero();
        for i in 0..n {
            let pi = base[i].0 + eps * dir[i].0;
            let g = base[i].1 + eps * dir[i].1;
            check_pi(pi, probe.arm)?;
            let treated = sample.treated()[i];
            let value = match probe.form {
                ScoreForm::Orthogonal => score_from_kernel(kernel[i], treated, Nuisance { pi, g }, probe.arm),
                ScoreForm::Naive => match probe.arm {
                    Arm::Treated => kernel[i] / pi,
                    Arm::Control => kernel[i] / (T::one() - pi),
                },
            };
            acc = acc + value;
        }
        Ok(acc / count(n))
    };
    let reference = mean_at(T::zero())?;
    epsilons
        .iter()
        .map(|&epsilon| Ok(OrthogonalityPoint { epsilon, shift: (mean_at(epsilon)? - reference).abs() }))
        .collect()
}

/// Least-squares slope of `ln shift` on `ln ε` over points where both are
/// positive; `None` with fewer than two such points.
pub fn log_log_slope<T: Real>(points: &[OrthogonalityPoint<T>]) -> Option<T> {
    let pairs: Vec<(T, T)> = points
        .iter()
        .filter(|p| p.epsilon > T::zero() && p.shift > T::zero())
        .map(|p| (p.epsilon.ln(), p.shift.ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let m = count::<T>(pairs.len());
    let mx = pairs.iter().map(|p| p.0).sum::<T>() / m;
    let my = pairs.iter().map(|p| p.1).sum::<T>() / m;
    let sxy = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let sxx = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    Some(sxy / sxx)
}
