//! Monte Carlo harness, file formats and command-line front end for `fisher-mean-core`.

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod spec_parse;

pub use error::{CliError, Result};
pub use harness::{
    fisher_sweep, run_trials, score_l2_diagnostic, EstimatorKind, EstimatorReport, ExperimentConfig,
    SweepRow, TrialReport,
};
pub use spec_parse::{parse_r_grid, parse_spec};
