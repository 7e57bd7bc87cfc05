//! Second-order kernels, their derivatives, scaled and product forms, and
//! bandwidth defaults.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{MteError, Result};
use crate::num::{count, lit, Real};
use crate::quadrature::adaptive_simpson;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Kernel family. Both are symmetric, integrate to one and have finite
/// second moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Epanechnikov,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Epanechnikov => "epanechnikov",
        }
    }

    /// `K^(order)(u)`.
    ///
    /// Epanechnikov derivatives at `|u| = 1` take the interior one-sided
    /// value so evaluation stays total.
    #[inline]
    pub fn value<T: Real>(self, u: T, order: Order) -> T {
        match self {
            KernelFamily::Gaussian => {
                let phi = (-(u * u) / lit(2.0)).exp() * lit(INV_SQRT_2PI);
                match order {
                    Order::Zero => phi,
                    Order::First => -u * phi,
                    Order::Second => (u * u - T::one()) * phi,
                }
            }
            KernelFamily::Epanechnikov => {
                if u.abs() > T::one() {
                    return T::zero();
                }
                match order {
                    Order::Zero => lit::<T>(0.75) * (T::one() - u * u),
                    Order::First => lit::<T>(-1.5) * u,
                    Order::Second => lit(-1.5),
                }
            }
        }
    }

    /// Half-width of the support, `None` for unbounded support.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            KernelFamily::Gaussian => None,
            KernelFamily::Epanechnikov => Some(1.0),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = MteError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            other => Err(MteError::InvalidArgument(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// Derivative order of a kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Order {
    Zero,
    First,
    Second,
}

impl Order {
    pub const ALL: [Order; 3] = [Order::Zero, Order::First, Order::Second];

    pub fn as_usize(self) -> usize {
        match self {
            Order::Zero => 0,
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

impl TryFrom<usize> for Order {
    type Error = MteError;

    fn try_from(order: usize) -> Result<Self> {
        match order {
            0 => Ok(Order::Zero),
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            other => {
                Err(MteError::InvalidArgument(format!("kernel derivative order {other} not supported (0, 1 or 2)")))
            }
        }
    }
}

/// `K^(order)(u)` with the order given as an integer.
pub fn eval_kernel<T: Real>(family: KernelFamily, u: T, order: usize) -> Result<T> {
    Ok(family.value(u, Order::try_from(order)?))
}

/// A kernel family paired with a bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<T> {
    family: KernelFamily,
    h: T,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(family: KernelFamily, h: T) -> Result<Self> {
        if !(h.is_finite() && h > T::zero()) {
            return Err(MteError::InvalidArgument(format!("bandwidth must be positive and finite, got {h}")));
        }
        Ok(KernelSpec { family, h })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// `K_h^(s)(diff) = h^{-(1+s)} K^(s)(diff / h)`.
    #[inline]
    pub fn scaled(&self, diff: T, order: Order) -> T {
        self.family.value(diff / self.h, order) / self.h.powi(1 + order.as_usize() as i32)
    }

    /// Product kernel over two covariate rows of equal length.
    #[inline]
    pub(crate) fn product_between(&self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), b.len());
        let mut p = T::one();
        for (&ai, &bi) in a.iter().zip(b) {
            p = p * self.family.value((ai - bi) / self.h, Order::Zero);
        }
        p / self.h.powi(a.len() as i32)
    }
}

/// `h^{-(1+order)} K^(order)(diff / h)`.
pub fn scaled_kernel<T: Real>(spec: &KernelSpec<T>, diff: T, order: usize) -> Result<T> {
    Ok(spec.scaled(diff, Order::try_from(order)?))
}

/// `h^{-d} Π_j K(diff_j / h)`.
pub fn product_kernel<T: Real>(spec: &KernelSpec<T>, diff: &[T]) -> Result<T> {
    if diff.is_empty() {
        return Err(MteError::InvalidArgument("product kernel needs at least one coordinate".into()));
    }
    let mut p = T::one();
    for &u in diff {
        p = p * spec.family.value(u / spec.h, Order::Zero);
    }
    Ok(p / spec.h.powi(diff.len() as i32))
}

/// `κ₀⁽¹⁾ = ∫K'(u)²du` and `κ₂ = ∫u²K(u)du`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants<T> {
    pub kappa0_1: T,
    pub kappa2: T,
}

/// Kernel constants, integrated once per family and cached.
pub fn kernel_constants<T: Real>(family: KernelFamily) -> KernelConstants<T> {
    static GAUSSIAN: OnceLock<KernelConstants<f64>> = OnceLock::new();
    static EPANECHNIKOV: OnceLock<KernelConstants<f64>> = OnceLock::new();
    let cell = match family {
        KernelFamily::Gaussian => &GAUSSIAN,
        KernelFamily::Epanechnikov => &EPANECHNIKOV,
    };
    let c = cell.get_or_init(|| integrate_constants(family));
    KernelConstants { kappa0_1: lit(c.kappa0_1), kappa2: lit(c.kappa2) }
}

fn integrate_constants(family: KernelFamily) -> KernelConstants<f64> {
    let radius = family.support_radius().unwrap_or(12.0);
    let d1 = |u: f64| family.value(u, Order::First).powi(2);
    let second = |u: f64| u * u * family.value(u, Order::Zero);
    // Split at the origin so the symmetric integrands never sample only the
    // centre and the tails on the first pass.
    let integrate =
        |f: &dyn Fn(f64) -> f64| adaptive_simpson(&f, -radius, 0.0, 5e-9) + adaptive_simpson(&f, 0.0, radius, 5e-9);
    KernelConstants { kappa0_1: integrate(&d1), kappa2: integrate(&second) }
}

/// Which estimator a default bandwidth is for; the rate exponent differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandwidthMethod {
    KernelMte,
    Dml,
}

/// A rule-of-thumb bandwidth `scale · n^(-exponent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthChoice<T> {
    pub h: T,
    pub exponent: f64,
    pub warning: Option<String>,
}

/// Default bandwidth `scale · n^(-r)`.
///
/// The DML route uses `r = 1/5`, which keeps `n h³ → ∞` and `n h⁷ → 0`. The
/// kernel route sits in the middle of the admissible window
/// `(1/7, 1/(d + 5))`; for `d ≥ 2` that window is empty with a second-order
/// kernel, so `1/7 + 0.01` is returned with a warning.
pub fn default_bandwidth<T: Real>(n: usize, d: usize, method: BandwidthMethod, scale: T) -> Result<BandwidthChoice<T>> {
    if n < 2 {
        return Err(MteError::InvalidArgument(format!("default bandwidth needs n >= 2, got {n}")));
    }
    if !(scale.is_finite() && scale > T::zero()) {
        return Err(MteError::InvalidArgument(format!("bandwidth scale must be positive, got {scale}")));
    }
    let (exponent, warning) = match method {
        BandwidthMethod::Dml => (0.2, None),
        BandwidthMethod::KernelMte if d < 2 => (0.5 * (1.0 / 7.0 + 1.0 / (d as f64 + 5.0)), None),
        BandwidthMethod::KernelMte => (
            1.0 / 7.0 + 0.01,
            Some(format!(
                "kernel estimator with {d} covariates: no second-order-kernel bandwidth satisfies the \
                 asymptotic-normality rate conditions; using exponent 1/7 + 0.01"
            )),
        ),
    };
    let h = scale * count::<T>(n).powf(lit(-exponent));
    Ok(BandwidthChoice { h, exponent, warning })
}
