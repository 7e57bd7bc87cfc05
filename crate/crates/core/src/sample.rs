//! Observed data `(Y, D, X)` and covariate standardization.

use serde::{Deserialize, Serialize};

use crate::error::{MteError, Result};
use crate::num::{count, lit, mean_sd, Real};

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Treated, Arm::Control];

    pub fn from_indicator(treated: bool) -> Arm {
        if treated {
            Arm::Treated
        } else {
            Arm::Control
        }
    }

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn label(self) -> u8 {
        self.index() as u8
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }

    /// Whether an observation with treatment indicator `treated` belongs here.
    #[inline]
    pub fn contains(self, treated: bool) -> bool {
        treated == (self == Arm::Treated)
    }
}

impl TryFrom<usize> for Arm {
    type Error = MteError;

    fn try_from(v: usize) -> Result<Self> {
        match v {
            0 => Ok(Arm::Control),
            1 => Ok(Arm::Treated),
            other => Err(MteError::InvalidArgument(format!("arm must be 0 or 1, got {other}"))),
        }
    }
}

/// Observed triples `(Yᵢ, Dᵢ, Xᵢ)` with covariates stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    y: Vec<T>,
    treated: Vec<bool>,
    x: Vec<T>,
    dim: usize,
}

impl<T: Real> Sample<T> {
    /// Builds a sample from an outcome vector, treatment indicators and a
    /// row-major covariate buffer of `y.len() * dim` values.
    pub fn new(y: Vec<T>, treated: Vec<bool>, x: Vec<T>, dim: usize) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(MteError::InvalidArgument("sample is empty".into()));
        }
        if dim == 0 {
            return Err(MteError::InvalidArgument("at least one covariate column is required".into()));
        }
        if treated.len() != n || x.len() != n * dim {
            return Err(MteError::InvalidArgument(format!(
                "length mismatch: {} outcomes, {} treatment flags, {} covariate values for dim {}",
                n,
                treated.len(),
                x.len(),
                dim
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(MteError::InvalidArgument(format!("non-finite outcome at row {i}")));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(MteError::InvalidArgument(format!(
                "non-finite covariate at row {} column {}",
                k / dim,
                k % dim
            )));
        }
        Ok(Sample { y, treated, x, dim })
    }

    /// Builds a sample from per-observation covariate rows.
    pub fn from_rows(y: Vec<T>, treated: Vec<bool>, rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(MteError::InvalidArgument("ragged covariate rows".into()));
        }
        Sample::new(y, treated, rows.concat(), dim)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn arm_size(&self, arm: Arm) -> usize {
        self.treated.iter().filter(|&&t| arm.contains(t)).count()
    }

    pub fn require_arm(&self, arm: Arm) -> Result<()> {
        if self.arm_size(arm) == 0 {
            return Err(MteError::EmptyArm { arm: arm.label() });
        }
        Ok(())
    }

    pub fn require_both_arms(&self) -> Result<()> {
        self.require_arm(Arm::Treated)?;
        self.require_arm(Arm::Control)
    }

    /// Sub-sample with the given observation indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Sample<T> {
        let mut x = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        Sample {
            y: indices.iter().map(|&i| self.y[i]).collect(),
            treated: indices.iter().map(|&i| self.treated[i]).collect(),
            x,
            dim: self.dim,
        }
    }

    /// Same covariates and outcomes with every treatment flag inverted.
    pub fn with_flipped_treatment(&self) -> Sample<T> {
        Sample { treated: self.treated.iter().map(|t| !t).collect(), ..self.clone() }
    }

    /// Same sample with every outcome shifted by `c`.
    pub fn with_shifted_outcome(&self, c: T) -> Sample<T> {
        Sample { y: self.y.iter().map(|&v| v + c).collect(), ..self.clone() }
    }

    /// Converts the sample to another float type.
    pub fn cast<U: Real>(&self) -> Sample<U> {
        let conv = |v: &T| U::from(*v).expect("representable");
        Sample {
            y: self.y.iter().map(conv).collect(),
            treated: self.treated.clone(),
            x: self.x.iter().map(conv).collect(),
            dim: self.dim,
        }
    }
}

/// Per-column location and scale applied by [`standardize_covariates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization<T> {
    pub location: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> Standardization<T> {
    /// Column means and `(n - 1)` standard deviations.
    ///
    /// With `allow_constant`, zero-variance columns get scale one instead of
    /// an error.
    pub fn fit(sample: &Sample<T>, allow_constant: bool) -> Result<Self> {
        let n = sample.len();
        let dim = sample.dim();
        let mut location = Vec::with_capacity(dim);
        let mut scale = Vec::with_capacity(dim);
        let mut column = Vec::with_capacity(n);
        for c in 0..dim {
            column.clear();
            column.extend((0..n).map(|i| sample.x[i * dim + c]));
            let (mean, sd) = mean_sd(&column);
            // Rounding leaves a constant column with an sd of order eps·|mean|.
            let noise = T::epsilon() * lit::<T>(1e3) * mean.abs().max(T::one());
            let usable = sd.is_finite() && sd > noise;
            if !usable && !allow_constant {
                return Err(MteError::ConstantCovariate { column: c });
            }
            location.push(mean);
            scale.push(if usable { sd } else { T::one() });
        }
        Ok(Standardization { location, scale })
    }

    pub fn apply_row(&self, row: &[T], out: &mut [T]) {
        for (k, (&v, o)) in row.iter().zip(out.iter_mut()).enumerate() {
            *o = (v - self.location[k]) / self.scale[k];
        }
    }

    pub fn apply(&self, sample: &Sample<T>) -> Sample<T> {
        let dim = sample.dim();
        let mut x = sample.x.clone();
        for row in x.chunks_mut(dim) {
            for (k, v) in row.iter_mut().enumerate() {
                *v = (*v - self.location[k]) / self.scale[k];
            }
        }
        Sample { x, ..sample.clone() }
    }
}

/// Centres every covariate column and scales it to unit `(n - 1)` standard
/// deviation. Outcomes and treatment are untouched.
pub fn standardize_covariates<T: Real>(sample: &Sample<T>) -> Result<(Sample<T>, Standardization<T>)> {
    if sample.len() < 2 {
        return Err(MteError::InvalidArgument("standardization needs at least two observations".into()));
    }
    let record = Standardization::fit(sample, false)?;
    Ok((record.apply(sample), record))
}

/// Fraction of treated observations.
pub fn treated_fraction<T: Real>(sample: &Sample<T>) -> T {
    count::<T>(sample.arm_size(Arm::Treated)) / count(sample.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Sample<f64> {
        Sample::new(values.to_vec(), vec![true; values.len()], values.to_vec(), 1).unwrap()
    }

    #[test]
    fn rejects_malformed_samples() {
        assert!(Sample::<f64>::new(vec![], vec![], vec![], 1).is_err());
        assert!(Sample::new(vec![1.0], vec![true, false], vec![0.0], 1).is_err());
        assert!(Sample::new(vec![f64::NAN], vec![true], vec![0.0], 1).is_err());
        assert!(Sample::new(vec![1.0], vec![true], vec![f64::INFINITY], 1).is_err());
        assert!(Sample::new(vec![1.0], vec![true], vec![], 0).is_err());
    }

    #[test]
    fn standardizes_with_n_minus_one() {
        let (s, rec) = standardize_covariates(&column(&[0.0, 2.0])).unwrap();
        // brute force: mean 1, sd sqrt(((0-1)^2 + (2-1)^2) / (2-1)) = sqrt(2)
        let sd = (((0.0f64 - 1.0).powi(2) + (2.0f64 - 1.0).powi(2)) / 1.0).sqrt();
        assert_eq!(rec.location, vec![1.0]);
        assert!((rec.scale[0] - sd).abs() < 1e-15);
        assert!((s.x()[0] + 1.0 / sd).abs() < 1e-15);
        assert!((s.x()[1] - 1.0 / sd).abs() < 1e-15);
        assert_eq!(s.y(), &[0.0, 2.0]);
    }

    #[test]
    fn constant_column_is_an_error() {
        assert_eq!(
            standardize_covariates(&column(&[3.0, 3.0, 3.0])).unwrap_err(),
            MteError::ConstantCovariate { column: 0 }
        );
    }

    #[test]
    fn standardization_is_idempotent() {
        let (once, _) = standardize_covariates(&column(&[0.3, 1.7, -2.0, 4.1, 0.0])).unwrap();
        let (twice, _) = standardize_covariates(&once).unwrap();
        for (a, b) in once.x().iter().zip(twice.x()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
