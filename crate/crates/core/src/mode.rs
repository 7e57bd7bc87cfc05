//! Grid argmax of a density curve with quadratic sub-grid refinement.

use serde::{Deserialize, Serialize};

use crate::density::DensityCurve;
use crate::error::{MteError, Result};
use crate::kernel::Order;
use crate::num::{lit, Real};

/// Secondary local maxima above this share of the peak mark a curve as
/// multimodal.
const MULTIMODAL_SHARE: f64 = 0.1;

/// Location of the maximum of a density curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeLocation<T> {
    pub theta: T,
    pub grid_index: usize,
    pub refined: bool,
    /// First derivative at `theta`, when an evaluator for it was supplied.
    pub foc_residual: Option<T>,
    /// Every grid value equals the maximum.
    pub flat: bool,
    /// More than one pronounced local maximum on the grid.
    pub multimodal: bool,
}

/// Index and value of the largest curve value; ties go to the smallest `y`.
pub fn argmax_on_grid<T: Real>(curve: &DensityCurve<T>) -> Result<(usize, T)> {
    if curve.order() != Order::Zero {
        return Err(MteError::InvalidCurve(format!(
            "mode search needs an order-0 curve, got order {}",
            curve.order().as_usize()
        )));
    }
    argmax_values(curve.values())
}

pub(crate) fn argmax_values<T: Real>(values: &[T]) -> Result<(usize, T)> {
    if values.len() < 3 {
        return Err(MteError::InvalidCurve(format!("curve has {} points, need at least 3", values.len())));
    }
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(MteError::InvalidCurve(format!("non-finite value at grid index {j}")));
    }
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    Ok((best, values[best]))
}

/// Whether every value equals the first one.
pub fn is_flat<T: Real>(values: &[T]) -> bool {
    values.iter().all(|&v| v == values[0])
}

/// Whether there are at least two strict local maxima above
/// [`MULTIMODAL_SHARE`] of the peak.
pub fn is_multimodal<T: Real>(values: &[T], peak: T) -> bool {
    let threshold = peak * lit(MULTIMODAL_SHARE);
    let m = values.len();
    let mut peaks = 0;
    for j in 0..m {
        let left = if j == 0 { T::neg_infinity() } else { values[j - 1] };
        let right = if j + 1 == m { T::neg_infinity() } else { values[j + 1] };
        if values[j] > left && values[j] >= right && values[j] > threshold {
            peaks += 1;
        }
    }
    peaks > 1
}

/// Vertex of the parabola through `(y0 - w, y0, y0 + w)`, clamped to
/// `[y0 - w, y0 + w]`; returns `y0` when the parabola is not concave.
pub fn refine_mode<T: Real, F: Fn(T) -> T>(evaluate: F, y0: T, window: T) -> T {
    let left = evaluate(y0 - window);
    let centre = evaluate(y0);
    let right = evaluate(y0 + window);
    let curvature = left - lit::<T>(2.0) * centre + right;
    if !(curvature < T::zero()) || !curvature.is_finite() {
        return y0;
    }
    let offset = window * (left - right) / (lit::<T>(2.0) * curvature);
    if !offset.is_finite() {
        return y0;
    }
    y0 + offset.max(-window).min(window)
}

/// Grid argmax followed by quadratic refinement within one grid spacing.
///
/// `evaluate` must be the order-0 density at arbitrary `y`; `derivative`, if
/// given, fills the first-order-condition residual at the returned mode.
pub fn mode_of_curve<T: Real, F, G>(
    curve: &DensityCurve<T>,
    evaluate: F,
    derivative: Option<G>,
) -> Result<ModeLocation<T>>
where
    F: Fn(T) -> T,
    G: Fn(T) -> T,
{
    let (index, peak) = argmax_on_grid(curve)?;
    let grid = curve.grid();
    let values = curve.values();
    let flat = is_flat(values);
    let multimodal = !flat && is_multimodal(values, peak);
    let m = grid.len();
    let (theta, refined) = if flat {
        (grid[index], false)
    } else {
        let window = if index + 1 < m { grid[index + 1] - grid[index] } else { grid[index] - grid[index - 1] };
        let lo = if index > 0 { grid[index - 1] } else { grid[0] };
        let hi = if index + 1 < m { grid[index + 1] } else { grid[m - 1] };
        let t = refine_mode(&evaluate, grid[index], window).max(lo).min(hi);
        (t, true)
    };
    let foc_residual = derivative.map(|d| d(theta));
    Ok(ModeLocation { theta, grid_index: index, refined, foc_residual, flat, multimodal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelFamily, KernelSpec};
    use crate::sample::Arm;
    use proptest::prelude::*;

    fn curve(grid: Vec<f64>, values: Vec<f64>) -> DensityCurve<f64> {
        let spec = KernelSpec::new(KernelFamily::Gaussian, 1.0).unwrap();
        DensityCurve::new(grid, values, Arm::Treated, Order::Zero, spec).unwrap()
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_on_grid(&curve(vec![0., 1., 2.], vec![1., 3., 2.])).unwrap(), (1, 3.0));
        assert_eq!(argmax_on_grid(&curve(vec![0., 1., 2.], vec![2., 5., 5.])).unwrap(), (1, 5.0));
        let flat = curve(vec![0., 1., 2.], vec![4., 4., 4.]);
        assert_eq!(argmax_on_grid(&flat).unwrap(), (0, 4.0));
        let loc = mode_of_curve(&flat, |_| 4.0, None::<fn(f64) -> f64>).unwrap();
        assert!(loc.flat);
        assert_eq!(loc.theta, 0.0);
    }

    #[test]
    fn argmax_rejects_bad_curves() {
        let c = curve(vec![0., 1., 2.], vec![1., f64::NAN, 2.]);
        assert!(matches!(argmax_on_grid(&c), Err(MteError::InvalidCurve(_))));
        let spec = KernelSpec::new(KernelFamily::Gaussian, 1.0).unwrap();
        let d1 = DensityCurve::new(vec![0., 1., 2.], vec![1., 2., 1.], Arm::Treated, Order::First, spec).unwrap();
        assert!(argmax_on_grid(&d1).is_err());
    }

    #[test]
    fn refine_examples() {
        let v = refine_mode(|y: f64| -(y - 0.3).powi(2), 0.25, 0.1);
        assert!((v - 0.3).abs() < 1e-9);
        assert_eq!(refine_mode(|_y: f64| 2.0, 0.25, 0.1), 0.25);
        let c = refine_mode(|y: f64| -(y - 1.0).powi(2), 0.0, 0.1);
        assert!((c - 0.1).abs() < 1e-15);
    }

    #[test]
    fn symmetric_triangle_mode_is_the_centre() {
        let grid: Vec<f64> = (0..9).map(|j| j as f64).collect();
        let values: Vec<f64> = grid.iter().map(|g| 4.0 - (g - 4.0).abs()).collect();
        let c = curve(grid.clone(), values);
        let tri = |y: f64| 4.0 - (y - 4.0).abs();
        let loc = mode_of_curve(&c, tri, Some(|_y: f64| 0.0)).unwrap();
        assert_eq!(loc.theta, 4.0);
        assert_eq!(loc.grid_index, 4);
        assert_eq!(loc.foc_residual, Some(0.0));
        assert!(!loc.multimodal);
    }

    #[test]
    fn multimodal_curves_are_flagged() {
        let grid: Vec<f64> = (0..7).map(|j| j as f64).collect();
        let c = curve(grid, vec![0., 2., 0.5, 0.1, 0.5, 1.9, 0.]);
        let loc = mode_of_curve(&c, |_| 0.0, None::<fn(f64) -> f64>).unwrap();
        assert!(loc.multimodal);
        assert_eq!(loc.grid_index, 1);
    }

    proptest! {
        #[test]
        fn refinement_recovers_parabola_vertex(vertex in -3.0f64..3.0, a in 0.1f64..10.0, step in 0.01f64..0.5) {
            let f = move |y: f64| 5.0 - a * (y - vertex).powi(2);
            let grid: Vec<f64> = (-20..=20).map(|j| vertex.round() + j as f64 * step + 0.37 * step).collect();
            prop_assume!(grid[0] < vertex && vertex < grid[40]);
            let c = curve(grid.clone(), grid.iter().map(|&g| f(g)).collect());
            let loc = mode_of_curve(&c, f, None::<fn(f64) -> f64>).unwrap();
            prop_assert!((loc.theta - vertex).abs() < 1e-9);
            prop_assert!((loc.theta - grid[loc.grid_index]).abs() <= step * (1.0 + 1e-12));
        }

        #[test]
        fn positive_rescaling_keeps_the_mode(lambda in 0.01f64..100.0, centre in 0.5f64..2.5) {
            let f = move |y: f64| (-(y - centre).powi(2) / 0.2).exp() + 0.3 * (-(y - 0.5 * centre).powi(2)).exp();
            let grid: Vec<f64> = (0..101).map(|j| j as f64 * 0.03).collect();
            let base = curve(grid.clone(), grid.iter().map(|&g| f(g)).collect());
            let scaled = curve(grid.clone(), grid.iter().map(|&g| lambda * f(g)).collect());
            let a = mode_of_curve(&base, f, None::<fn(f64) -> f64>).unwrap();
            let b = mode_of_curve(&scaled, |y| lambda * f(y), None::<fn(f64) -> f64>).unwrap();
            prop_assert_eq!(a.grid_index, b.grid_index);
            prop_assert!((a.theta - b.theta).abs() < 1e-12);
        }

        #[test]
        fn refined_mode_stays_in_bracketing_cell(values in proptest::collection::vec(0.0f64..1.0, 5..40)) {
            let grid: Vec<f64> = (0..values.len()).map(|j| j as f64 * 0.5).collect();
            let c = curve(grid.clone(), values.clone());
            let lookup = |y: f64| {
                let j = ((y / 0.5).round() as usize).min(values.len() - 1);
                values[j]
            };
            let loc = mode_of_curve(&c, lookup, None::<fn(f64) -> f64>).unwrap();
            let j = loc.grid_index;
            let lo = if j > 0 { grid[j - 1] } else { grid[0] };
            let hi = if j + 1 < grid.len() { grid[j + 1] } else { grid[grid.len() - 1] };
            prop_assert!(loc.theta >= lo && loc.theta <= hi);
            prop_assert!(loc.theta >= grid[0] && loc.theta <= *grid.last().unwrap());
        }
    }
}
