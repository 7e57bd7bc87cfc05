//! First-step learners for the cross-fitted estimator: the propensity score
//! `π(x) = P(D = 1 | X = x)` and the smoothed outcome regressions
//! `g(x; y) = E[K_h⁽ˢ⁾(y - Y) | X = x, D = arm]` fitted jointly over a grid.
//!
//! Every learner standardizes covariates on its own fitting subset.

mod knn;
mod logistic;
mod nw;
mod ridge;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use knn::KnnHyper;
pub use logistic::LogisticHyper;
pub use nw::KernelNwHyper;
pub use ridge::RidgeHyper;

use crate::density::validate_grid;
use crate::error::{MteError, Result};
use crate::kernel::{KernelSpec, Order};
use crate::num::{lit, Real};
use crate::sample::{Arm, Sample};

/// Default clipping level for propensity predictions.
pub const DEFAULT_CLIP_KAPPA: f64 = 0.01;

/// `min(max(p, kappa), 1 - kappa)`.
pub fn clip_propensity<T: Real>(p: T, kappa: T) -> T {
    p.max(kappa).min(T::one() - kappa)
}

fn validate_kappa<T: Real>(kappa: T) -> Result<()> {
    if kappa > T::zero() && kappa < lit(0.5) {
        Ok(())
    } else {
        Err(MteError::InvalidArgument(format!("clip kappa must lie in (0, 0.5), got {kappa}")))
    }
}

/// A fitted model of `P(D = 1 | X = x)` before clipping.
pub trait Propensity<T>: Send + Sync {
    fn predict_raw(&self, x: &[T]) -> T;
}

struct FnPropensity<F>(F);

impl<T, F: Fn(&[T]) -> T + Send + Sync> Propensity<T> for FnPropensity<F> {
    fn predict_raw(&self, x: &[T]) -> T {
        (self.0)(x)
    }
}

/// A propensity model with its clipping level, applied at prediction time.
#[derive(Clone)]
pub struct PropensityFit<T> {
    model: Arc<dyn Propensity<T>>,
    learner_id: String,
    clip_kappa: Option<T>,
}

impl<T: Real> PropensityFit<T> {
    /// `clip_kappa = None` disables clipping; intended for oracle nuisances
    /// in tests and diagnostics.
    pub fn new(model: Arc<dyn Propensity<T>>, learner_id: impl Into<String>, clip_kappa: Option<T>) -> Result<Self> {
        if let Some(k) = clip_kappa {
            validate_kappa(k)?;
        }
        Ok(PropensityFit { model, learner_id: learner_id.into(), clip_kappa })
    }

    pub fn from_fn<F>(learner_id: impl Into<String>, f: F, clip_kappa: Option<T>) -> Result<Self>
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        Self::new(Arc::new(FnPropensity(f)), learner_id, clip_kappa)
    }

    pub fn constant(p: T, clip_kappa: Option<T>) -> Result<Self> {
        Self::from_fn("constant", move |_: &[T]| p, clip_kappa)
    }

    pub fn predict(&self, x: &[T]) -> T {
        let p = self.model.predict_raw(x);
        match self.clip_kappa {
            Some(k) => clip_propensity(p, k),
            None => p,
        }
    }

    pub fn predict_raw(&self, x: &[T]) -> T {
        self.model.predict_raw(x)
    }

    pub fn learner_id(&self) -> &str {
        &self.learner_id
    }

    pub fn clip_kappa(&self) -> Option<T> {
        self.clip_kappa
    }

    pub fn without_clipping(mut self) -> Self {
        self.clip_kappa = None;
        self
    }
}

impl<T: Real> std::fmt::Debug for PropensityFit<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PropensityFit")
            .field("learner_id", &self.learner_id)
            .field("clip_kappa", &self.clip_kappa)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "learner")]
pub enum PropensityLearner {
    Logistic(LogisticHyper),
    Knn(KnnHyper),
    KernelNw(KernelNwHyper),
}

impl Default for PropensityLearner {
    fn default() -> Self {
        PropensityLearner::Logistic(LogisticHyper::default())
    }
}

impl PropensityLearner {
    pub fn name(&self) -> &'static str {
        match self {
            PropensityLearner::Logistic(_) => "logistic",
            PropensityLearner::Knn(_) => "knn",
            PropensityLearner::KernelNw(_) => "kernel",
        }
    }
}

/// Fits `P(D = 1 | X)` on `sample`; predictions are clipped to
/// `[kappa, 1 - kappa]`.
pub fn fit_propensity<T: Real>(sample: &Sample<T>, learner: &PropensityLearner, kappa: T) -> Result<PropensityFit<T>> {
    validate_kappa(kappa)?;
    for arm in Arm::BOTH {
        if sample.arm_size(arm) == 0 {
            return Err(MteError::NoOverlap(format!(
                "propensity fitting subset has no observations with D = {}",
                arm.label()
            )));
        }
    }
    let model: Arc<dyn Propensity<T>> = match learner {
        PropensityLearner::Logistic(h) => Arc::new(logistic::fit(sample, h)?),
        PropensityLearner::Knn(h) => Arc::new(knn::fit_propensity(sample, h)?),
        PropensityLearner::KernelNw(h) => Arc::new(nw::fit(sample, h)?),
    };
    PropensityFit::new(model, learner.name(), Some(kappa))
}

/// Grid predictions of a smoothed outcome regression.
pub trait SmoothedOutcome<T: Real>: Send + Sync {
    /// Writes `ĝ(x; grid_j)` for every grid point into `out`.
    fn predict_row(&self, x: &[T], order: Order, out: &mut [T]);

    /// `(ĝ(x; grid_j), ĝ(x; grid_{j+1}))`.
    fn predict_cell(&self, x: &[T], j: usize, order: Order, grid_len: usize) -> (T, T) {
        let mut row = vec![T::zero(); grid_len];
        self.predict_row(x, order, &mut row);
        (row[j], row[(j + 1).min(grid_len - 1)])
    }
}

struct FnOutcome<T, F> {
    grid: Vec<T>,
    f: F,
}

impl<T: Real, F: Fn(&[T], T, Order) -> T + Send + Sync> SmoothedOutcome<T> for FnOutcome<T, F> {
    fn predict_row(&self, x: &[T], order: Order, out: &mut [T]) {
        for (o, &y) in out.iter_mut().zip(&self.grid) {
            *o = (self.f)(x, y, order);
        }
    }

    fn predict_cell(&self, x: &[T], j: usize, order: Order, grid_len: usize) -> (T, T) {
        let k = (j + 1).min(grid_len - 1);
        ((self.f)(x, self.grid[j], order), (self.f)(x, self.grid[k], order))
    }
}

/// A smoothed outcome regression for one arm, fitted over a fixed grid for a
/// set of derivative orders.
#[derive(Clone)]
pub struct SmoothedOutcomeFit<T> {
    model: Arc<dyn SmoothedOutcome<T>>,
    learner_id: String,
    grid: Vec<T>,
    arm: Arm,
    spec: KernelSpec<T>,
    orders: Vec<Order>,
}

impl<T: Real> SmoothedOutcomeFit<T> {
    pub fn new(
        model: Arc<dyn SmoothedOutcome<T>>,
        learner_id: impl Into<String>,
        grid: Vec<T>,
        arm: Arm,
        spec: KernelSpec<T>,
        orders: &[Order],
    ) -> Result<Self> {
        validate_grid(&grid)?;
        Ok(SmoothedOutcomeFit {
            model,
            learner_id: learner_id.into(),
            grid,
            arm,
            spec,
            orders: normalize_orders(orders)?,
        })
    }

    /// Wraps a closure `(x, y, order) ↦ g`, evaluated at grid points only;
    /// off-grid queries interpolate like any fitted learner.
    pub fn from_fn<F>(grid: Vec<T>, arm: Arm, spec: KernelSpec<T>, f: F) -> Result<Self>
    where
        F: Fn(&[T], T, Order) -> T + Send + Sync + 'static,
    {
        let model = Arc::new(FnOutcome { grid: grid.clone(), f });
        Self::new(model, "oracle", grid, arm, spec, &Order::ALL)
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn learner_id(&self) -> &str {
        &self.learner_id
    }

    fn require_order(&self, order: Order) -> Result<()> {
        if self.orders.contains(&order) {
            Ok(())
        } else {
            Err(MteError::Configuration(format!("smoothed outcome was not fitted for order {}", order.as_usize())))
        }
    }

    /// Predictions at every grid point.
    pub fn predict_row(&self, x: &[T], order: Order) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.grid.len()];
        self.predict_row_into(x, order, &mut out)?;
        Ok(out)
    }

    pub fn predict_row_into(&self, x: &[T], order: Order, out: &mut [T]) -> Result<()> {
        self.require_order(order)?;
        if out.len() != self.grid.len() {
            return Err(MteError::Configuration(format!(
                "output buffer has {} slots for a grid of {} points",
                out.len(),
                self.grid.len()
            )));
        }
        self.model.predict_row(x, order, out);
        Ok(())
    }

    pub fn predict(&self, x: &[T], j: usize, order: Order) -> Result<T> {
        self.require_order(order)?;
        if j >= self.grid.len() {
            return Err(MteError::InvalidArgument(format!("grid index {j} out of range")));
        }
        Ok(self.model.predict_cell(x, j, order, self.grid.len()).0)
    }

    /// Linear interpolation between the two grid predictions bracketing `y`;
    /// constant beyond the grid ends.
    pub fn predict_at(&self, x: &[T], y: T, order: Order) -> Result<T> {
        self.require_order(order)?;
        let m = self.grid.len();
        let g = &self.grid;
        if y <= g[0] {
            return Ok(self.model.predict_cell(x, 0, order, m).0);
        }
        if y >= g[m - 1] {
            return Ok(self.model.predict_cell(x, m - 1, order, m).0);
        }
        let j = g.partition_point(|&v| v <= y) - 1;
        let (a, b) = self.model.predict_cell(x, j, order, m);
        let t = (y - g[j]) / (g[j + 1] - g[j]);
        Ok(a + t * (b - a))
    }
}

impl<T: Real> std::fmt::Debug for SmoothedOutcomeFit<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothedOutcomeFit")
            .field("learner_id", &self.learner_id)
            .field("arm", &self.arm)
            .field("grid_points", &self.grid.len())
            .field("orders", &self.orders)
            .finish()
    }
}

fn normalize_orders(orders: &[Order]) -> Result<Vec<Order>> {
    let mut out: Vec<Order> = Order::ALL.iter().copied().filter(|o| orders.contains(o)).collect();
    out.dedup();
    if out.is_empty() {
        return Err(MteError::InvalidArgument("at least one derivative order must be fitted".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "learner")]
pub enum OutcomeLearner {
    Ridge(RidgeHyper),
    Knn(KnnHyper),
}

impl Default for OutcomeLearner {
    fn default() -> Self {
        OutcomeLearner::Ridge(RidgeHyper::default())
    }
}

impl OutcomeLearner {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeLearner::Ridge(_) => "ridge",
            OutcomeLearner::Knn(_) => "knn",
        }
    }
}

/// Fits `E[K_h⁽ˢ⁾(y_j - Y) | X, D = arm]` for every grid point `y_j` and
/// requested order `s`, using only the observations of `arm` in `sample`.
pub fn fit_smoothed_outcome<T: Real>(
    sample: &Sample<T>,
    arm: Arm,
    grid: &[T],
    spec: &KernelSpec<T>,
    learner: &OutcomeLearner,
    orders: &[Order],
) -> Result<SmoothedOutcomeFit<T>> {
    validate_grid(grid)?;
    let orders = normalize_orders(orders)?;
    let members: Vec<usize> = (0..sample.len()).filter(|&i| arm.contains(sample.treated()[i])).collect();
    if members.is_empty() {
        return Err(MteError::NoData { arm: arm.label() });
    }
    let subset = sample.subset(&members);
    let model: Arc<dyn SmoothedOutcome<T>> = match learner {
        OutcomeLearner::Ridge(h) => Arc::new(ridge::fit(&subset, grid, spec, h, &orders)?),
        OutcomeLearner::Knn(h) => Arc::new(knn::fit_outcome(&subset, grid, spec, h)?),
    };
    SmoothedOutcomeFit::new(model, learner.name(), grid.to_vec(), arm, *spec, &orders)
}

/// Covariates of `sample` standardized by its own column means and sds,
/// row-major in `f64`, with the record needed to map new rows.
pub(crate) struct StandardizedDesign<T> {
    pub standardization: crate::sample::Standardization<T>,
    pub rows: Vec<f64>,
    pub dim: usize,
}

impl<T: Real> StandardizedDesign<T> {
    pub fn fit(sample: &Sample<T>) -> Result<Self> {
        let standardization = crate::sample::Standardization::fit(sample, true)?;
        let dim = sample.dim();
        let mut rows = Vec::with_capacity(sample.len() * dim);
        let mut buf = vec![T::zero(); dim];
        for i in 0..sample.len() {
            standardization.apply_row(sample.row(i), &mut buf);
            rows.extend(buf.iter().map(|&v| crate::num::to_f64(v)));
        }
        Ok(StandardizedDesign { standardization, rows, dim })
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transform(&self, x: &[T], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = crate::num::to_f64((x[k] - self.standardization.location[k]) / self.standardization.scale[k]);
        }
    }
}
