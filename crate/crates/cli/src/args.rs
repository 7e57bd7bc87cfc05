use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mte_core::dml::DmlConfig;
use mte_core::kernel_mte::{Bandwidth, GridSpec, KernelMteConfig};
use mte_core::nuisance::{KernelNwHyper, KnnHyper, LogisticHyper, OutcomeLearner, PropensityLearner, RidgeHyper};
use mte_core::simulation::{DgpSpec, EstimatorConfig};
use mte_core::KernelFamily;

#[derive(Debug, Parser)]
#[command(name = "mte", version, about = "Mode treatment effect estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the mode treatment effect from a CSV file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study on a built-in design.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Kernel,
    Dml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Epanechnikov,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => KernelFamily::Gaussian,
            KernelArg::Epanechnikov => KernelFamily::Epanechnikov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropensityArg {
    Logistic,
    Knn,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutcomeArg {
    Ridge,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Table,
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth<f64>, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Bandwidth::Auto);
    }
    let h: f64 = s.parse().map_err(|_| format!("expected 'auto' or a positive number, got '{s}'"))?;
    if h.is_finite() && h > 0.0 {
        Ok(Bandwidth::Fixed(h))
    } else {
        Err(format!("bandwidth must be positive, got {s}"))
    }
}

fn parse_open_unit(s: &str, upper: f64) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v < upper {
        Ok(v)
    } else {
        Err(format!("{s} must lie in (0, {upper})"))
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    parse_open_unit(s, 1.0)
}

fn parse_kappa(s: &str) -> Result<f64, String> {
    parse_open_unit(s, 0.5)
}

fn parse_dgp(s: &str) -> Result<String, String> {
    if DgpSpec::named(s).is_some() {
        Ok(s.to_string())
    } else {
        Err(format!("unknown design '{s}'; available: {}", DgpSpec::NAMES.join(", ")))
    }
}

/// Estimator settings shared by `estimate` and `simulate`.
#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, default_value = "kernel")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    /// `auto` or a positive bandwidth.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth, allow_negative_numbers = true)]
    pub bandwidth: Bandwidth<f64>,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(3..))]
    pub grid_points: u64,
    /// Cross-fitting folds (DML only).
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    pub folds: u64,
    #[arg(long, value_enum, default_value = "logistic")]
    pub learner_pi: PropensityArg,
    #[arg(long, value_enum, default_value = "ridge")]
    pub learner_g: OutcomeArg,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    /// Propensity clipping level.
    #[arg(long, default_value_t = 0.01, value_parser = parse_kappa)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub output: OutputFormat,
}

impl EstimatorArgs {
    pub fn kernel_config(&self) -> KernelMteConfig<f64> {
        KernelMteConfig {
            kernel: self.kernel.into(),
            bandwidth: self.bandwidth,
            grid: GridSpec::Auto { points: self.grid_points as usize },
            alpha: self.alpha,
            kappa: self.kappa,
            propensity: None,
        }
    }

    pub fn dml_config(&self) -> DmlConfig<f64> {
        DmlConfig {
            folds: self.folds as usize,
            seed: self.seed,
            propensity: match self.learner_pi {
                PropensityArg::Logistic => PropensityLearner::Logistic(LogisticHyper::default()),
                PropensityArg::Knn => PropensityLearner::Knn(KnnHyper::default()),
                PropensityArg::Kernel => PropensityLearner::KernelNw(KernelNwHyper::default()),
            },
            outcome: match self.learner_g {
                OutcomeArg::Ridge => OutcomeLearner::Ridge(RidgeHyper::default()),
                OutcomeArg::Knn => OutcomeLearner::Knn(KnnHyper::default()),
            },
            kernel: self.kernel.into(),
            bandwidth: self.bandwidth,
            grid: GridSpec::Auto { points: self.grid_points as usize },
            alpha: self.alpha,
            kappa: self.kappa,
        }
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        match self.method {
            MethodArg::Kernel => EstimatorConfig::Kernel(self.kernel_config()),
            MethodArg::Dml => EstimatorConfig::Dml(self.dml_config()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Outcome column.
    #[arg(long)]
    pub y: String,
    /// Treatment column (0/1 or true/false).
    #[arg(long)]
    pub d: String,
    /// Covariate columns, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    /// Write the order-0 density curves as CSV (arm,y,value).
    #[arg(long)]
    pub emit_curves: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Built-in design name.
    #[arg(long, value_parser = parse_dgp)]
    pub dgp: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub n: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub reps: u64,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}
