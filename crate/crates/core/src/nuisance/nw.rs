use serde::{Deserialize, Serialize};

use super::{Propensity, StandardizedDesign};
use crate::error::{MteError, Result};
use crate::kernel::{KernelFamily, Order};
use crate::num::{denominator_floor, lit, Real};
use crate::sample::Sample;

/// Nadaraya–Watson regression of `D` on standardized covariates with a
/// product kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelNwHyper {
    pub family: KernelFamily,
    /// `None` means `1.06 · n^(-1/(4+d))`.
    pub bandwidth: Option<f64>,
}

impl Default for KernelNwHyper {
    fn default() -> Self {
        KernelNwHyper { family: KernelFamily::Gaussian, bandwidth: None }
    }
}

pub(super) struct NwModel<T> {
    design: StandardizedDesign<T>,
    treated: Vec<bool>,
    family: KernelFamily,
    h: f64,
    fallback: f64,
}

impl<T: Real> Propensity<T> for NwModel<T> {
    fn predict_raw(&self, x: &[T]) -> T {
        let mut z = vec![0.0; self.design.dim];
        self.design.transform(x, &mut z);
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &t) in self.treated.iter().enumerate() {
            let w: f64 = z
                .iter()
                .zip(self.design.row(i))
                .map(|(a, b)| self.family.value((a - b) / self.h, Order::Zero))
                .product();
            den += w;
            if t {
                num += w;
            }
        }
        if den <= denominator_floor::<f64>() {
            lit(self.fallback)
        } else {
            lit(num / den)
        }
    }
}

pub(super) fn fit<T: Real>(sample: &Sample<T>, hyper: &KernelNwHyper) -> Result<NwModel<T>> {
    let design = StandardizedDesign::fit(sample)?;
    let n = sample.len();
    let h = hyper.bandwidth.unwrap_or_else(|| 1.06 * (n as f64).powf(-1.0 / (4.0 + design.dim as f64)));
    if !(h.is_finite() && h > 0.0) {
        return Err(MteError::InvalidArgument(format!("propensity bandwidth must be positive, got {h}")));
    }
    let treated = sample.treated().to_vec();
    let fallback = treated.iter().filter(|&&t| t).count() as f64 / n as f64;
    Ok(NwModel { design, treated, family: hyper.family, h, fallback })
}
