//! Command-line front end: CSV ingestion, estimation, Monte Carlo runs and
//! JSON or table output.

pub mod args;
pub mod input;
pub mod record;
pub mod run;

pub use args::{Cli, Command, EstimateArgs, EstimatorArgs, SimulateArgs};
pub use input::{load_csv, ColumnMap};
pub use record::{CisRecord, DiagnosticsRecord, EstimatesRecord, ResultRecord, SesRecord, VarianceRecord};
pub use run::{cmd_estimate, cmd_simulate, run, CliError, EXIT_ESTIMATION, EXIT_IO, EXIT_OK, EXIT_USAGE};
