//! Scalar abstraction shared by every estimator in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type the estimators are generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(value: f64) -> T {
    T::from_f64(value).expect("literal representable in the target float type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(value: usize) -> T {
    T::from_usize(value).expect("count representable in the target float type")
}

#[inline]
pub(crate) fn to_f64<T: Real>(value: T) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Smallest denominator treated as non-zero: `1e-300` in `f64`, the smallest
/// positive normal value for narrower types.
#[inline]
pub(crate) fn denominator_floor<T: Real>() -> T {
    let floor = T::from_f64(1e-300).unwrap_or_else(T::zero);
    if floor > T::zero() {
        floor
    } else {
        T::min_positive_value()
    }
}

/// Sample mean and `(n - 1)` standard deviation.
pub fn mean_sd<T: Real>(values: &[T]) -> (T, T) {
    let n = values.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let mean = values.iter().copied().sum::<T>() / count(n);
    if n < 2 {
        return (mean, T::nan());
    }
    let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (mean, (ss / count(n - 1)).sqrt())
}

/// Linear-interpolation sample quantile (the "type 7" definition).
pub fn quantile<T: Real>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    if n == 0 {
        return T::nan();
    }
    if n == 1 {
        return sorted[0];
    }
    let pos = p * count(n - 1);
    let lo = pos.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_idx = (lo_idx + 1).min(n - 1);
    let frac = pos - lo;
    sorted[lo_idx] + frac * (sorted[hi_idx] - sorted[lo_idx])
}

/// Robust dispersion `min(sd, IQR / 1.349)`; falls back to whichever is
/// positive when the other degenerates.
pub fn robust_dispersion<T: Real>(values: &[T]) -> T {
    let (_, sd) = mean_sd(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let iqr = quantile(&sorted, lit(0.75)) - quantile(&sorted, lit(0.25));
    let scaled_iqr = iqr / lit(1.349);
    match (sd > T::zero(), scaled_iqr > T::zero()) {
        (true, true) => sd.min(scaled_iqr),
        (true, false) => sd,
        (false, true) => scaled_iqr,
        (false, false) => T::zero(),
    }
}
