//! Nadaraya–Watson conditional densities of `Y` given `(D, X)` and the
//! covariate-averaged marginal densities built from them.

use serde::{Deserialize, Serialize};

use crate::error::{MteError, Result};
use crate::kernel::{KernelSpec, Order};
use crate::num::{count, denominator_floor, lit, to_f64, Real};
use crate::sample::{Arm, Sample};

/// Default number of grid points for mode search.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// A density (or derivative) tabulated on an increasing y-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve<T> {
    grid: Vec<T>,
    values: Vec<T>,
    arm: Arm,
    order: Order,
    spec: KernelSpec<T>,
}

impl<T: Real> DensityCurve<T> {
    pub fn new(grid: Vec<T>, values: Vec<T>, arm: Arm, order: Order, spec: KernelSpec<T>) -> Result<Self> {
        validate_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(MteError::InvalidCurve(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        Ok(DensityCurve { grid, values, arm, order, spec })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    /// Trapezoid-rule integral of the tabulated values.
    pub fn integral(&self) -> T {
        self.grid.windows(2).zip(self.values.windows(2)).map(|(g, v)| (g[1] - g[0]) * (v[0] + v[1]) / lit(2.0)).sum()
    }
}

/// Checks that a grid has at least three strictly increasing finite points.
pub fn validate_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.len() < 3 {
        return Err(MteError::InvalidArgument(format!("grid needs at least 3 points, got {}", grid.len())));
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(MteError::InvalidArgument("grid contains non-finite points".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MteError::InvalidArgument("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `points` equally spaced values on `[min(y) - h, max(y) + h]`.
pub fn default_grid<T: Real>(y: &[T], h: T, points: usize) -> Result<Vec<T>> {
    if y.is_empty() {
        return Err(MteError::InvalidArgument("cannot build a grid from no outcomes".into()));
    }
    if points < 3 {
        return Err(MteError::InvalidArgument(format!("grid needs at least 3 points, got {points}")));
    }
    let lo = y.iter().copied().fold(T::infinity(), T::min) - h;
    let hi = y.iter().copied().fold(T::neg_infinity(), T::max) + h;
    let step = (hi - lo) / count(points - 1);
    let mut grid: Vec<T> = (0..points).map(|j| lo + count::<T>(j) * step).collect();
    grid[points - 1] = hi;
    validate_grid(&grid)?;
    Ok(grid)
}

/// `f̂_{Y|D=arm,X}^{(order)}(y | x)`: the kernel-weighted ratio estimator with
/// the outcome kernel differentiated `order` times.
pub fn cond_density_at<T: Real>(
    sample: &Sample<T>,
    arm: Arm,
    spec: &KernelSpec<T>,
    y: T,
    x: &[T],
    order: usize,
) -> Result<T> {
    let order = Order::try_from(order)?;
    if x.len() != sample.dim() {
        return Err(MteError::InvalidArgument(format!(
            "query has {} covariates, sample has {}",
            x.len(),
            sample.dim()
        )));
    }
    sample.require_arm(arm)?;
    let mut num = T::zero();
    let mut den = T::zero();
    for j in 0..sample.len() {
        if !arm.contains(sample.treated()[j]) {
            continue;
        }
        let w = spec.product_between(x, sample.row(j));
        num = num + w * spec.scaled(y - sample.y()[j], order);
        den = den + w;
    }
    if den <= denominator_floor() {
        return Err(MteError::DegenerateLocality {
            arm: arm.label(),
            x: x.iter().map(|&v| to_f64(v)).collect(),
            observation: None,
        });
    }
    Ok(num / den)
}

/// Covariate-kernel weights of one sample under one bandwidth.
///
/// For every query row `i` the row `W_i· = K_h(Xᵢ - X·)` is evaluated once and
/// split by arm into the denominators `Σ_{j∈arm} W_ij`. The marginal estimate
/// `n⁻¹ Σᵢ f̂(y | Xᵢ)` then collapses to a weighted kernel sum over one arm's
/// outcomes with weights `a_j = n⁻¹ Σᵢ W_ij / denom_arm(i)`.
#[derive(Debug, Clone)]
pub(crate) struct LocalWeights<T> {
    /// `denominators[arm][i] = Σ_{j∈arm} W_ij`.
    pub denominators: [Vec<T>; 2],
    /// `observation_weights[j] = a_j` for arm members (0 elsewhere).
    pub observation_weights: Vec<T>,
}

impl<T: Real> LocalWeights<T> {
    /// One pass over the `n × n` covariate kernel matrix, never stored.
    pub fn compute(sample: &Sample<T>, spec: &KernelSpec<T>, arms: &[Arm]) -> Result<Self> {
        let n = sample.len();
        let mut buffer = vec![T::zero(); n];
        let mut denominators = [vec![T::zero(); n], vec![T::zero(); n]];
        let mut acc = vec![T::zero(); n];
        let floor = denominator_floor::<T>();
        let treated = sample.treated();
        for i in 0..n {
            let xi = sample.row(i);
            let mut den = [T::zero(); 2];
            for (j, slot) in buffer.iter_mut().enumerate() {
                let w = spec.product_between(xi, sample.row(j));
                *slot = w;
                let a = Arm::from_indicator(treated[j]).index();
                den[a] = den[a] + w;
            }
            for &arm in arms {
                if den[arm.index()] <= floor {
                    return Err(MteError::DegenerateLocality {
                        arm: arm.label(),
                        x: xi.iter().map(|&v| to_f64(v)).collect(),
                        observation: Some(i),
                    });
                }
            }
            for (j, &w) in buffer.iter().enumerate() {
                let arm = Arm::from_indicator(treated[j]);
                if arms.contains(&arm) {
                    acc[j] = acc[j] + w / den[arm.index()];
                }
            }
            denominators[0][i] = den[0];
            denominators[1][i] = den[1];
        }
        let n_t = count::<T>(n);
        let observation_weights = acc.into_iter().map(|a| a / n_t).collect();
        Ok(LocalWeights { denominators, observation_weights })
    }

    /// Share of the covariate kernel mass at `Xᵢ` carried by `arm`; the
    /// in-sample Nadaraya–Watson estimate of `P(D = arm | X = Xᵢ)`.
    pub fn arm_probability(&self, arm: Arm, i: usize) -> T {
        let a = self.denominators[arm.index()][i];
        a / (self.denominators[0][i] + self.denominators[1][i])
    }

    pub fn marginal(&self, sample: &Sample<T>, spec: &KernelSpec<T>, arm: Arm) -> KernelMarginal<T> {
        let mut y = Vec::new();
        let mut weights = Vec::new();
        for (j, &t) in sample.treated().iter().enumerate() {
            if arm.contains(t) {
                y.push(sample.y()[j]);
                weights.push(self.observation_weights[j]);
            }
        }
        KernelMarginal { spec: *spec, arm, y, weights }
    }
}

/// The covariate-averaged density `f̂_{Y_arm}` written as a weighted kernel
/// sum over one arm's outcomes; evaluates at any `y` and derivative order.
#[derive(Debug, Clone)]
pub struct KernelMarginal<T> {
    spec: KernelSpec<T>,
    arm: Arm,
    y: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> KernelMarginal<T> {
    pub fn fit(sample: &Sample<T>, arm: Arm, spec: &KernelSpec<T>) -> Result<Self> {
        sample.require_arm(arm)?;
        let lw = LocalWeights::compute(sample, spec, &[arm])?;
        Ok(lw.marginal(sample, spec, arm))
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    /// Observation weights `a_j`; they sum to one.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    #[inline]
    pub fn eval(&self, y: T, order: Order) -> T {
        let mut s = T::zero();
        for (&yj, &w) in self.y.iter().zip(&self.weights) {
            s = s + w * self.spec.scaled(y - yj, order);
        }
        s
    }

    pub fn curve(&self, grid: &[T], order: Order) -> Result<DensityCurve<T>> {
        let values = grid.iter().map(|&g| self.eval(g, order)).collect();
        DensityCurve::new(grid.to_vec(), values, self.arm, order, self.spec)
    }
}

/// `f̂_{Y_arm}^{(order)}` on `grid`: the conditional estimator averaged over
/// every observation's covariates (both arms).
pub fn marginal_density_curve<T: Real>(
    sample: &Sample<T>,
    arm: Arm,
    spec: &KernelSpec<T>,
    grid: &[T],
    order: usize,
) -> Result<DensityCurve<T>> {
    let order = Order::try_from(order)?;
    validate_grid(grid)?;
    KernelMarginal::fit(sample, arm, spec)?.curve(grid, order)
}
