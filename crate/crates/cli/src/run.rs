use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use mte_core::simulation::{run_monte_carlo, DgpSpec};
use mte_core::{estimate_dml_mte, estimate_kernel_mte, Estimate, MteError};
use serde::Serialize;
use thiserror::Error;

use crate::args::{Cli, Command, EstimateArgs, EstimatorArgs, MethodArg, OutputFormat, SimulateArgs};
use crate::input::{load_csv, ColumnMap};
use crate::record::{render_table, ResultRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ESTIMATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Estimation(#[from] MteError),
}

impl CliError {
    pub(crate) fn from_csv(path: &Path, e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io { path: path.to_path_buf(), source },
            other => CliError::Input(format!("{}: {:?}", path.display(), other)),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) | CliError::Io { .. } => EXIT_IO,
            CliError::Estimation(_) => EXIT_ESTIMATION,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Io { .. } => "io",
            CliError::Estimation(e) => e.kind(),
        }
    }

    fn report(&self, err: &mut dyn Write) {
        let doc = serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } });
        let _ = writeln!(err, "{doc}");
    }
}

fn write_stdout(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })
}

fn render<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Usage(format!("cannot encode result: {e}")))
}

fn run_estimator(sample: &mte_core::Sample64, args: &EstimatorArgs) -> Result<Estimate<f64>, MteError> {
    match args.method {
        MethodArg::Kernel => estimate_kernel_mte(sample, &args.kernel_config()),
        MethodArg::Dml => estimate_dml_mte(sample, &args.dml_config()),
    }
}

fn write_curves(path: &Path, estimate: &Estimate<f64>) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::from_csv(path, e))?;
    w.write_record(["arm", "y", "value"]).map_err(|e| CliError::from_csv(path, e))?;
    for (label, curve) in [("1", &estimate.treated_curve), ("0", &estimate.control_curve)] {
        for (y, v) in curve.grid().iter().zip(curve.values()) {
            w.write_record([label, &y.to_string(), &v.to_string()]).map_err(|e| CliError::from_csv(path, e))?;
        }
    }
    w.flush().map_err(io)
}

fn estimate(args: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let columns = ColumnMap { y: args.y.clone(), d: args.d.clone(), x: args.x.clone() };
    let sample = load_csv(&args.input, &columns)?;
    let start = Instant::now();
    let estimate = run_estimator(&sample, &args.estimator)?;
    let timing_ms = start.elapsed().as_secs_f64() * 1e3;
    for w in &estimate.result.diagnostics.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    if let Some(path) = &args.emit_curves {
        write_curves(path, &estimate)?;
    }
    let record = ResultRecord::from_result(&estimate.result, timing_ms);
    let text = match args.estimator.output {
        OutputFormat::Json => render(&record)?,
        OutputFormat::Table => render_table(&record.table_rows()),
    };
    write_stdout(out, &text)
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let dgp = DgpSpec::named(&args.dgp).ok_or_else(|| {
        CliError::Usage(format!("unknown design '{}'; available: {}", args.dgp, DgpSpec::NAMES.join(", ")))
    })?;
    let e = &args.estimator;
    let report = run_monte_carlo(&dgp, args.n as usize, args.reps as usize, &e.estimator_config(), e.seed)?;
    let text = match e.output {
        OutputFormat::Json => render(&report)?,
        OutputFormat::Table => {
            let mut rows = vec![
                ("dgp".to_string(), report.dgp.clone()),
                ("method".into(), report.method.name().into()),
                ("n".into(), report.n.to_string()),
                ("reps".into(), report.reps.to_string()),
                ("failures".into(), report.failures.to_string()),
            ];
            for (name, s) in [("theta1", &report.theta1), ("theta0", &report.theta0), ("delta", &report.delta)] {
                rows.push((format!("{name} truth"), format!("{:.6}", s.truth)));
                rows.push((format!("{name} bias"), format!("{:.6}", s.bias)));
                rows.push((format!("{name} sd"), format!("{:.6}", s.sd)));
                rows.push((format!("{name} rmse"), format!("{:.6}", s.rmse)));
                rows.push((format!("{name} coverage"), format!("{:.3}", s.coverage)));
            }
            render_table(&rows)
        }
    };
    write_stdout(out, &text)
}

/// Runs `mte estimate`, writing the result to `out` and diagnostics to `err`.
pub fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match estimate(args, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            e.report(err);
            e.exit_code()
        }
    }
}

/// Runs `mte simulate`, writing the Monte Carlo report to `out`.
pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match simulate(args, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            e.report(err);
            e.exit_code()
        }
    }
}

/// Parses the command line and dispatches; returns the process exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
    }
}
