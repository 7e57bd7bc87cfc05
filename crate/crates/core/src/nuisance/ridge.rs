use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{SmoothedOutcome, StandardizedDesign};
use crate::error::{MteError, Result};
use crate::kernel::{KernelSpec, Order};
use crate::num::{lit, to_f64, Real};
use crate::sample::Sample;

/// Ridge regression on a polynomial expansion of standardized covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeHyper {
    /// Penalty on every non-intercept coefficient.
    pub lambda: f64,
    /// 1 for linear features; 2 adds squares and pairwise products.
    pub degree: usize,
}

impl Default for RidgeHyper {
    fn default() -> Self {
        RidgeHyper { lambda: 1.0, degree: 2 }
    }
}

fn feature_count(dim: usize, degree: usize) -> usize {
    1 + dim + if degree >= 2 { dim * (dim + 1) / 2 } else { 0 }
}

fn features(z: &[f64], degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    out.extend_from_slice(z);
    if degree >= 2 {
        for a in 0..z.len() {
            for b in a..z.len() {
                out.push(z[a] * z[b]);
            }
        }
    }
}

/// One coefficient matrix (`features × grid`) per fitted order.
pub(super) struct RidgeOutcome<T> {
    design: StandardizedDesign<T>,
    degree: usize,
    coefficients: [Option<DMatrix<f64>>; 3],
}

impl<T: Real> RidgeOutcome<T> {
    fn feature_row(&self, x: &[T]) -> Vec<f64> {
        let mut z = vec![0.0; self.design.dim];
        self.design.transform(x, &mut z);
        let mut f = Vec::with_capacity(feature_count(z.len(), self.degree));
        features(&z, self.degree, &mut f);
        f
    }

    fn column(&self, f: &[f64], coef: &DMatrix<f64>, j: usize) -> f64 {
        coef.column(j).iter().zip(f).map(|(c, v)| c * v).sum()
    }
}

impl<T: Real> SmoothedOutcome<T> for RidgeOutcome<T> {
    fn predict_row(&self, x: &[T], order: Order, out: &mut [T]) {
        let coef = self.coefficients[order.as_usize()].as_ref().expect("order checked by the caller");
        let f = self.feature_row(x);
        for (j, o) in out.iter_mut().enumerate() {
            *o = lit(self.column(&f, coef, j));
        }
    }

    fn predict_cell(&self, x: &[T], j: usize, order: Order, grid_len: usize) -> (T, T) {
        let coef = self.coefficients[order.as_usize()].as_ref().expect("order checked by the caller");
        let f = self.feature_row(x);
        let k = (j + 1).min(grid_len - 1);
        (lit(self.column(&f, coef, j)), lit(self.column(&f, coef, k)))
    }
}

/// Solves `(ZᵀZ + λP) B = Zᵀ Y` for every grid point and order at once with
/// a single Cholesky factorization.
pub(super) fn fit<T: Real>(
    sample: &Sample<T>,
    grid: &[T],
    spec: &KernelSpec<T>,
    hyper: &RidgeHyper,
    orders: &[Order],
) -> Result<RidgeOutcome<T>> {
    if !(hyper.lambda.is_finite() && hyper.lambda >= 0.0) {
        return Err(MteError::InvalidArgument(format!("ridge penalty must be non-negative, got {}", hyper.lambda)));
    }
    if !(1..=2).contains(&hyper.degree) {
        return Err(MteError::InvalidArgument(format!("ridge degree must be 1 or 2, got {}", hyper.degree)));
    }
    let design = StandardizedDesign::fit(sample)?;
    let n = design.len();
    let p = feature_count(design.dim, hyper.degree);
    let m = grid.len();
    let mut z = DMatrix::zeros(n, p);
    let mut buf = Vec::with_capacity(p);
    for i in 0..n {
        features(design.row(i), hyper.degree, &mut buf);
        for (c, &v) in buf.iter().enumerate() {
            z[(i, c)] = v;
        }
    }
    let mut gram = z.tr_mul(&z);
    for c in 1..p {
        gram[(c, c)] += hyper.lambda;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| MteError::InvalidArgument("ridge system is singular; use a positive penalty".into()))?;

    let mut targets = DMatrix::zeros(n, m * orders.len());
    for (b, &order) in orders.iter().enumerate() {
        for i in 0..n {
            let yi = sample.y()[i];
            for (j, &g) in grid.iter().enumerate() {
                targets[(i, b * m + j)] = to_f64(spec.scaled(g - yi, order));
            }
        }
    }
    let solution = chol.solve(&z.tr_mul(&targets));
    let mut coefficients = [None, None, None];
    for (b, &order) in orders.iter().enumerate() {
        coefficients[order.as_usize()] = Some(solution.columns(b * m, m).into_owned());
    }
    Ok(RidgeOutcome { design, degree: hyper.degree, coefficients })
}
