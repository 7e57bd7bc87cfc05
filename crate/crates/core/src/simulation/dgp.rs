use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MteError, Result};
use crate::kernel::{KernelFamily, KernelSpec, Order};
use crate::sample::{Arm, Sample};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn std_normal_pdf(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Normal,
    LogNormal,
}

/// One mixture component: `shift + scale·ε` (normal) or
/// `shift + exp(scale·ε)` (log-normal), `ε ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub family: NoiseFamily,
    pub shift: f64,
    pub scale: f64,
}

impl MixtureComponent {
    fn density(&self, v: f64) -> f64 {
        match self.family {
            NoiseFamily::Normal => std_normal_pdf((v - self.shift) / self.scale) / self.scale,
            NoiseFamily::LogNormal => {
                let t = v - self.shift;
                if t <= 0.0 {
                    0.0
                } else {
                    std_normal_pdf(t.ln() / self.scale) / (self.scale * t)
                }
            }
        }
    }

    fn draw(&self, eps: f64) -> f64 {
        match self.family {
            NoiseFamily::Normal => self.shift + self.scale * eps,
            NoiseFamily::LogNormal => self.shift + (self.scale * eps).exp(),
        }
    }

    fn range(&self) -> (f64, f64) {
        match self.family {
            NoiseFamily::Normal => (self.shift - 8.0 * self.scale, self.shift + 8.0 * self.scale),
            NoiseFamily::LogNormal => (self.shift, self.shift + (6.0 * self.scale).exp()),
        }
    }
}

/// Conditional law of `Y` given `X = x` with location `μ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OutcomeLaw {
    /// `μ(x) + σ·ε`.
    Normal { sigma: f64 },
    /// `exp(μ(x) + σ·ε)`.
    LogNormal { sigma: f64 },
    /// `μ(x) + V` with `V` drawn from the mixture.
    SkewMixture { components: Vec<MixtureComponent> },
}

/// Outcome law for one arm with location `intercept + slopesᵀx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmLaw {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub law: OutcomeLaw,
}

impl ArmLaw {
    pub fn location(&self, x: &[f64]) -> f64 {
        self.intercept + self.slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn has_constant_location(&self) -> bool {
        self.slopes.iter().all(|&b| b == 0.0)
    }

    /// Density of `Y` given a location value.
    pub fn density_at_location(&self, y: f64, location: f64) -> f64 {
        match &self.law {
            OutcomeLaw::Normal { sigma } => std_normal_pdf((y - location) / sigma) / sigma,
            OutcomeLaw::LogNormal { sigma } => {
                if y <= 0.0 {
                    0.0
                } else {
                    std_normal_pdf((y.ln() - location) / sigma) / (sigma * y)
                }
            }
            OutcomeLaw::SkewMixture { components } => {
                components.iter().map(|c| c.weight * c.density(y - location)).sum()
            }
        }
    }

    pub fn density(&self, y: f64, x: &[f64]) -> f64 {
        self.density_at_location(y, self.location(x))
    }

    /// Interval holding all but a negligible share of the mass for
    /// locations in `[lo, hi]`.
    pub(crate) fn support(&self, lo: f64, hi: f64) -> (f64, f64) {
        match &self.law {
            OutcomeLaw::Normal { sigma } => (lo - 8.0 * sigma, hi + 8.0 * sigma),
            OutcomeLaw::LogNormal { sigma } => ((lo - 6.0 * sigma).exp(), (hi + 6.0 * sigma).exp()),
            OutcomeLaw::SkewMixture { components } => {
                let (a, b) = components
                    .iter()
                    .map(MixtureComponent::range)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)));
                (lo + a, hi + b)
            }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, x: &[f64]) -> f64 {
        let loc = self.location(x);
        match &self.law {
            OutcomeLaw::Normal { sigma } => loc + sigma * rng.sample::<f64, _>(StandardNormal),
            OutcomeLaw::LogNormal { sigma } => (loc + sigma * rng.sample::<f64, _>(StandardNormal)).exp(),
            OutcomeLaw::SkewMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = components.len() - 1;
                for (c, comp) in components.iter().enumerate() {
                    acc += comp.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                loc + components[chosen].draw(rng.sample(StandardNormal))
            }
        }
    }

    fn validate(&self, dim: usize, label: &str) -> Result<()> {
        if self.slopes.len() != dim {
            return Err(MteError::InvalidArgument(format!(
                "{label}: {} slopes for dimension {dim}",
                self.slopes.len()
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match &self.law {
            OutcomeLaw::Normal { sigma } | OutcomeLaw::LogNormal { sigma } => {
                if !positive(*sigma) {
                    return Err(MteError::InvalidArgument(format!("{label}: sigma must be positive")));
                }
            }
            OutcomeLaw::SkewMixture { components } => {
                if components.is_empty()
                    || components.iter().any(|c| !positive(c.weight) || !positive(c.scale) || !c.shift.is_finite())
                {
                    return Err(MteError::InvalidArgument(format!("{label}: malformed mixture components")));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(MteError::InvalidArgument(format!("{label}: mixture weights sum to {total}")));
                }
            }
        }
        Ok(())
    }
}

/// `P(D = 1 | X = x) = 1 / (1 + exp(-(intercept + slopesᵀx)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitPropensity {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl LogitPropensity {
    pub fn constant(p: f64, dim: usize) -> Self {
        LogitPropensity { intercept: (p / (1.0 - p)).ln(), slopes: vec![0.0; dim] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let z = self.intercept + self.slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }

    /// Smallest and largest values over the unit cube.
    pub fn range(&self) -> (f64, f64) {
        let lo = self.intercept + self.slopes.iter().map(|b| b.min(0.0)).sum::<f64>();
        let hi = self.intercept + self.slopes.iter().map(|b| b.max(0.0)).sum::<f64>();
        (1.0 / (1.0 + (-lo).exp()), 1.0 / (1.0 + (-hi).exp()))
    }
}

/// A simulation design: `X ~ U(0,1)^dim`, logit-linear treatment and one
/// outcome law per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub id: String,
    pub dim: usize,
    pub propensity: LogitPropensity,
    pub treated: ArmLaw,
    pub control: ArmLaw,
}

impl DgpSpec {
    pub const NAMES: [&'static str; 4] =
        ["lognormal-plain", "lognormal-confounded", "normal-selection", "skew-mixture"];

    /// Log-normal arms (`μ₁ = 0.5`, `μ₀ = 0`, `σ = 0.6`), a fair coin for
    /// treatment and an irrelevant covariate.
    pub fn lognormal_plain() -> Self {
        let law = OutcomeLaw::LogNormal { sigma: 0.6 };
        DgpSpec {
            id: "lognormal-plain".into(),
            dim: 1,
            propensity: LogitPropensity::constant(0.5, 1),
            treated: ArmLaw { intercept: 0.5, slopes: vec![0.0], law: law.clone() },
            control: ArmLaw { intercept: 0.0, slopes: vec![0.0], law },
        }
    }

    /// Log-normal arms whose log-location rises with the covariate that
    /// also drives selection into treatment.
    pub fn lognormal_confounded() -> Self {
        let law = OutcomeLaw::LogNormal { sigma: 0.6 };
        DgpSpec {
            id: "lognormal-confounded".into(),
            dim: 1,
            propensity: LogitPropensity { intercept: -1.0, slopes: vec![2.0] },
            treated: ArmLaw { intercept: 0.5, slopes: vec![0.5], law: law.clone() },
            control: ArmLaw { intercept: 0.0, slopes: vec![0.5], law },
        }
    }

    /// Normal arms with unit variance and covariate-driven location and
    /// selection.
    pub fn normal_selection() -> Self {
        let law = OutcomeLaw::Normal { sigma: 1.0 };
        DgpSpec {
            id: "normal-selection".into(),
            dim: 1,
            propensity: LogitPropensity { intercept: -1.0, slopes: vec![2.0] },
            treated: ArmLaw { intercept: 1.0, slopes: vec![1.0], law: law.clone() },
            control: ArmLaw { intercept: 0.0, slopes: vec![1.0], law },
        }
    }

    /// A normal core with a log-normal right tail, selection on two
    /// covariates.
    pub fn skew_mixture() -> Self {
        let law = OutcomeLaw::SkewMixture {
            components: vec![
                MixtureComponent { weight: 0.7, family: NoiseFamily::Normal, shift: 0.0, scale: 0.5 },
                MixtureComponent { weight: 0.3, family: NoiseFamily::LogNormal, shift: 0.0, scale: 0.8 },
            ],
        };
        DgpSpec {
            id: "skew-mixture".into(),
            dim: 2,
            propensity: LogitPropensity { intercept: -0.75, slopes: vec![1.0, 0.5] },
            treated: ArmLaw { intercept: 1.0, slopes: vec![0.5, 0.3], law: law.clone() },
            control: ArmLaw { intercept: 0.0, slopes: vec![0.5, 0.3], law },
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "lognormal-plain" => Some(Self::lognormal_plain()),
            "lognormal-confounded" => Some(Self::lognormal_confounded()),
            "normal-selection" => Some(Self::normal_selection()),
            "skew-mixture" => Some(Self::skew_mixture()),
            _ => None,
        }
    }

    pub fn arm(&self, arm: Arm) -> &ArmLaw {
        match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        }
    }

    pub fn propensity(&self, x: &[f64]) -> f64 {
        self.propensity.eval(x)
    }

    /// Checks dimensions, law parameters and overlap: the propensity must
    /// stay within `[0.05, 0.95]` on the unit cube.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(MteError::InvalidArgument("design needs at least one covariate".into()));
        }
        if self.propensity.slopes.len() != self.dim {
            return Err(MteError::InvalidArgument("propensity slopes do not match the dimension".into()));
        }
        let (lo, hi) = self.propensity.range();
        if lo < 0.05 || hi > 0.95 {
            return Err(MteError::NoOverlap(format!("propensity ranges over [{lo}, {hi}], outside [0.05, 0.95]")));
        }
        self.treated.validate(self.dim, "treated arm")?;
        self.control.validate(self.dim, "control arm")
    }

    /// Closed form of `E[K_h⁽ˢ⁾(y - Y) | X = x, D = arm]` for normal arm
    /// laws smoothed by a Gaussian kernel: the `s`-th derivative of the
    /// `N(μ(x), σ² + h²)` density at `y`. `None` for any other combination.
    pub fn smoothed_outcome(&self, arm: Arm, x: &[f64], y: f64, spec: &KernelSpec<f64>, order: Order) -> Option<f64> {
        let law = self.arm(arm);
        match (&law.law, spec.family()) {
            (OutcomeLaw::Normal { sigma }, KernelFamily::Gaussian) => {
                let tau = (sigma * sigma + spec.h() * spec.h()).sqrt();
                let wide = KernelSpec::new(KernelFamily::Gaussian, tau).ok()?;
                Some(wide.scaled(y - law.location(x), order))
            }
            _ => None,
        }
    }
}

/// Draws `n` observations: `X ~ U(0,1)^dim`, `D | X ~ Bernoulli(π(X))`,
/// `Y | X, D` from the arm's law. Deterministic given `seed`.
pub fn generate(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Sample<f64>> {
    if n < 2 {
        return Err(MteError::InvalidArgument(format!("need at least two draws, got {n}")));
    }
    dgp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    let mut treated = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * dgp.dim);
    let mut row = vec![0.0; dgp.dim];
    for _ in 0..n {
        for v in row.iter_mut() {
            *v = rng.random();
        }
        let d = rng.random::<f64>() < dgp.propensity(&row);
        y.push(dgp.arm(Arm::from_indicator(d)).draw(&mut rng, &row));
        treated.push(d);
        x.extend_from_slice(&row);
    }
    Sample::new(y, treated, x, dgp.dim)
}
