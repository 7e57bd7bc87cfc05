use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate, DgpSpec};
use super::oracle::true_mode;
use crate::dml::{estimate_dml_mte, DmlConfig};
use crate::error::{MteError, Result};
use crate::kernel_mte::{estimate_kernel_mte, KernelMteConfig, Method, MteResult};
use crate::sample::Arm;

/// Estimator and settings used in every replication.
#[derive(Debug, Clone)]
pub enum EstimatorConfig {
    Kernel(KernelMteConfig<f64>),
    Dml(DmlConfig<f64>),
}

impl EstimatorConfig {
    pub fn method(&self) -> Method {
        match self {
            EstimatorConfig::Kernel(_) => Method::Kernel,
            EstimatorConfig::Dml(_) => Method::Dml,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            EstimatorConfig::Kernel(c) => c.alpha,
            EstimatorConfig::Dml(c) => c.alpha,
        }
    }

    /// Runs the estimator; DML fold shuffles are seeded with `seed`.
    pub fn estimate(&self, sample: &crate::sample::Sample<f64>, seed: u64) -> Result<MteResult<f64>> {
        match self {
            EstimatorConfig::Kernel(c) => Ok(estimate_kernel_mte(sample, c)?.result),
            EstimatorConfig::Dml(c) => {
                let c = DmlConfig { seed, ..c.clone() };
                Ok(estimate_dml_mte(sample, &c)?.result)
            }
        }
    }
}

/// Error summaries of one target over the successful replications.
///
/// `sd` uses the population convention, so `rmse² = bias² + sd²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    /// Share of intervals at level `1 - alpha` containing the truth.
    pub coverage: f64,
    pub mean_ci_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepEstimate {
    pub h: f64,
    pub theta1: f64,
    pub theta0: f64,
    pub delta: f64,
    pub se1: f64,
    pub se0: f64,
    pub se_delta: f64,
    pub ci1: (f64, f64),
    pub ci0: (f64, f64),
    pub ci_delta: (f64, f64),
}

impl From<&MteResult<f64>> for RepEstimate {
    fn from(r: &MteResult<f64>) -> Self {
        RepEstimate {
            h: r.h,
            theta1: r.theta1,
            theta0: r.theta0,
            delta: r.delta,
            se1: r.se1,
            se0: r.se0,
            se_delta: r.se_delta,
            ci1: r.ci1,
            ci0: r.ci0,
            ci_delta: r.ci_delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<RepEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub schema_version: String,
    pub dgp: String,
    pub method: Method,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub succeeded: usize,
    pub failures: usize,
    pub theta1: TargetSummary,
    pub theta0: TargetSummary,
    pub delta: TargetSummary,
    pub records: Vec<RepRecord>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep`: the base seed mixed with the index.
pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    splitmix64(seed ^ splitmix64(rep as u64))
}

fn summarize(truth: f64, values: &[(f64, (f64, f64))]) -> TargetSummary {
    let m = values.len() as f64;
    let mean = values.iter().map(|v| v.0).sum::<f64>() / m;
    let sd = (values.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / m).sqrt();
    let rmse = (values.iter().map(|v| (v.0 - truth).powi(2)).sum::<f64>() / m).sqrt();
    let covered = values.iter().filter(|v| v.1 .0 <= truth && truth <= v.1 .1).count() as f64;
    let width = values.iter().map(|v| v.1 .1 - v.1 .0).sum::<f64>() / m;
    TargetSummary { truth, mean, bias: mean - truth, sd, rmse, coverage: covered / m, mean_ci_width: width }
}

/// Runs `reps` independent generate-then-estimate cycles and summarizes the
/// errors against the design's true modes.
///
/// Failed replications are recorded and excluded; more than 10% failures is
/// an error.
pub fn run_monte_carlo(
    dgp: &DgpSpec,
    n: usize,
    reps: usize,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<MonteCarloReport> {
    if reps < 2 {
        return Err(MteError::InvalidArgument(format!("need at least two replications, got {reps}")));
    }
    let theta1 = true_mode(dgp, Arm::Treated)?;
    let theta0 = true_mode(dgp, Arm::Control)?;
    let records: Vec<RepRecord> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let s = rep_seed(seed, rep);
            let outcome = generate(dgp, n, s).and_then(|sample| config.estimate(&sample, splitmix64(s)));
            match outcome {
                Ok(r) => RepRecord { rep, seed: s, estimate: Some(RepEstimate::from(&r)), error: None },
                Err(e) => RepRecord { rep, seed: s, estimate: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let ok: Vec<&RepEstimate> = records.iter().filter_map(|r| r.estimate.as_ref()).collect();
    let failures = reps - ok.len();
    if failures * 10 > reps || ok.is_empty() {
        return Err(MteError::Harness { failed: failures, reps });
    }
    let pick = |f: fn(&RepEstimate) -> (f64, (f64, f64))| ok.iter().map(|e| f(e)).collect::<Vec<_>>();
    Ok(MonteCarloReport {
        schema_version: "1".into(),
        dgp: dgp.id.clone(),
        method: config.method(),
        n,
        reps,
        seed,
        alpha: config.alpha(),
        succeeded: ok.len(),
        failures,
        theta1: summarize(theta1, &pick(|e| (e.theta1, e.ci1))),
        theta0: summarize(theta0, &pick(|e| (e.theta0, e.ci0))),
        delta: summarize(theta1 - theta0, &pick(|e| (e.delta, e.ci_delta))),
        records,
    })
}
