use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Propensity, StandardizedDesign};
use crate::error::{MteError, Result};
use crate::num::{lit, Real};
use crate::sample::Sample;

/// L2-penalized logistic regression on standardized covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticHyper {
    /// Penalty on the slopes (the intercept is free); `None` means `1e-4 · n`.
    pub lambda: Option<f64>,
    /// Convergence threshold on `‖gradient‖ / n`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        LogisticHyper { lambda: None, tolerance: 1e-8, max_iterations: 100 }
    }
}

pub(super) struct LogisticModel<T> {
    design: StandardizedDesign<T>,
    coef: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl<T: Real> Propensity<T> for LogisticModel<T> {
    fn predict_raw(&self, x: &[T]) -> T {
        let mut z = vec![0.0; self.design.dim];
        self.design.transform(x, &mut z);
        let eta = self.coef[0] + z.iter().zip(&self.coef[1..]).map(|(a, b)| a * b).sum::<f64>();
        lit(sigmoid(eta))
    }
}

pub(super) fn fit<T: Real>(sample: &Sample<T>, hyper: &LogisticHyper) -> Result<LogisticModel<T>> {
    let design = StandardizedDesign::fit(sample)?;
    let n = design.len();
    let p = design.dim + 1;
    let lambda = hyper.lambda.unwrap_or(1e-4 * n as f64);
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(MteError::InvalidArgument(format!("logistic penalty must be non-negative, got {lambda}")));
    }
    let z = DMatrix::from_fn(n, p, |i, c| if c == 0 { 1.0 } else { design.row(i)[c - 1] });
    let d = DVector::from_iterator(n, sample.treated().iter().map(|&t| if t { 1.0 } else { 0.0 }));

    let objective = |beta: &DVector<f64>| -> f64 {
        let eta = &z * beta;
        let ll: f64 = eta.iter().zip(d.iter()).map(|(&e, &di)| di * e - softplus(e)).sum();
        let penalty: f64 = beta.iter().skip(1).map(|b| b * b).sum();
        ll - 0.5 * lambda * penalty
    };

    let mut beta = DVector::zeros(p);
    let mut current = objective(&beta);
    for _ in 0..hyper.max_iterations {
        let eta = &z * &beta;
        let prob = eta.map(sigmoid);
        let mut grad = z.tr_mul(&(&d - &prob));
        for c in 1..p {
            grad[c] -= lambda * beta[c];
        }
        if grad.norm() / n as f64 <= hyper.tolerance {
            return Ok(LogisticModel { design, coef: beta.iter().copied().collect() });
        }
        let w = prob.map(|q| q * (1.0 - q));
        let mut hessian = DMatrix::from_fn(p, p, |a, b| (0..n).map(|i| w[i] * z[(i, a)] * z[(i, b)]).sum::<f64>());
        for c in 1..p {
            hessian[(c, c)] += lambda;
        }
        for c in 0..p {
            hessian[(c, c)] += 1e-12;
        }
        let step = hessian.cholesky().ok_or(MteError::Convergence { iterations: 0 })?.solve(&grad);
        // Inside the quadratic basin the predicted gain drops below the
        // rounding noise of the log-likelihood sum, so comparing objective
        // values would stall the line search; take the full step there.
        let predicted_gain = 0.5 * grad.dot(&step);
        if predicted_gain <= 1e-12 * (1.0 + current.abs()) {
            beta += step;
            current = objective(&beta);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &step * t;
            let value = objective(&candidate);
            if value.is_finite() && value >= current {
                beta = candidate;
                current = value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(MteError::Convergence { iterations: hyper.max_iterations })
}
