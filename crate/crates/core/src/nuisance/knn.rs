use serde::{Deserialize, Serialize};

use super::{Propensity, SmoothedOutcome, StandardizedDesign};
use crate::error::{MteError, Result};
use crate::kernel::{KernelSpec, Order};
use crate::num::{count, Real};
use crate::sample::Sample;

/// Uniform-weight nearest neighbours in standardized covariate space.
///
/// All training points tied with the k-th nearest distance are included.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KnnHyper {
    /// `None` means `⌈n^0.6⌉`.
    pub k: Option<usize>,
}

impl KnnHyper {
    fn resolve(&self, n: usize) -> Result<usize> {
        let k = self.k.unwrap_or_else(|| (n as f64).powf(0.6).ceil() as usize);
        if k == 0 {
            return Err(MteError::InvalidArgument("k must be at least 1".into()));
        }
        Ok(k.min(n))
    }
}

struct NeighbourIndex<T> {
    design: StandardizedDesign<T>,
    k: usize,
}

impl<T: Real> NeighbourIndex<T> {
    /// Neighbour indices in ascending order.
    fn query(&self, x: &[T]) -> Vec<usize> {
        let n = self.design.len();
        let mut z = vec![0.0; self.design.dim];
        self.design.transform(x, &mut z);
        let dist: Vec<f64> =
            (0..n).map(|i| z.iter().zip(self.design.row(i)).map(|(a, b)| (a - b) * (a - b)).sum()).collect();
        if self.k >= n {
            return (0..n).collect();
        }
        let mut scratch = dist.clone();
        let (_, kth, _) = scratch.select_nth_unstable_by(self.k - 1, f64::total_cmp);
        let cutoff = *kth;
        (0..n).filter(|&i| dist[i] <= cutoff).collect()
    }
}

pub(super) struct KnnPropensity<T> {
    index: NeighbourIndex<T>,
    treated: Vec<bool>,
}

impl<T: Real> Propensity<T> for KnnPropensity<T> {
    fn predict_raw(&self, x: &[T]) -> T {
        let nb = self.index.query(x);
        let hits = nb.iter().filter(|&&i| self.treated[i]).count();
        count::<T>(hits) / count(nb.len())
    }
}

pub(super) fn fit_propensity<T: Real>(sample: &Sample<T>, hyper: &KnnHyper) -> Result<KnnPropensity<T>> {
    let k = hyper.resolve(sample.len())?;
    let index = NeighbourIndex { design: StandardizedDesign::fit(sample)?, k };
    Ok(KnnPropensity { index, treated: sample.treated().to_vec() })
}

/// Averages the kernel targets of the neighbours' outcomes.
pub(super) struct KnnOutcome<T> {
    index: NeighbourIndex<T>,
    y: Vec<T>,
    grid: Vec<T>,
    spec: KernelSpec<T>,
}

impl<T: Real> KnnOutcome<T> {
    fn average(&self, nb: &[usize], y: T, order: Order) -> T {
        let mut s = T::zero();
        for &i in nb {
            s = s + self.spec.scaled(y - self.y[i], order);
        }
        s / count(nb.len())
    }
}

impl<T: Real> SmoothedOutcome<T> for KnnOutcome<T> {
    fn predict_row(&self, x: &[T], order: Order, out: &mut [T]) {
        let nb = self.index.query(x);
        for (o, &y) in out.iter_mut().zip(&self.grid) {
            *o = self.average(&nb, y, order);
        }
    }

    fn predict_cell(&self, x: &[T], j: usize, order: Order, grid_len: usize) -> (T, T) {
        let nb = self.index.query(x);
        let k = (j + 1).min(grid_len - 1);
        (self.average(&nb, self.grid[j], order), self.average(&nb, self.grid[k], order))
    }
}

pub(super) fn fit_outcome<T: Real>(
    sample: &Sample<T>,
    grid: &[T],
    spec: &KernelSpec<T>,
    hyper: &KnnHyper,
) -> Result<KnnOutcome<T>> {
    let k = hyper.resolve(sample.len())?;
    let index = NeighbourIndex { design: StandardizedDesign::fit(sample)?, k };
    Ok(KnnOutcome { index, y: sample.y().to_vec(), grid: grid.to_vec(), spec: *spec })
}
