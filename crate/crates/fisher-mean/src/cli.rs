use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fisher_mean_core::rng::stream_id;
use fisher_mean_core::{global_estimate, Clipping, EstimatorConfig, RngStream};

use crate::error::{CliError, Result};
use crate::harness::{self, EstimatorKind, ExperimentConfig, SAMPLE_TAG};
use crate::io;
use crate::spec_parse::{parse_r_grid, parse_spec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "fisher-mean", version, about = "Symmetric mean estimation via smoothed Fisher information")]
pub struct Cli {
    /// Master seed; every output is a function of the inputs and this seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (a directory for `benchmark`). Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the global estimator on a sample file or on generated data.
    Estimate(EstimateArgs),
    /// Monte Carlo comparison of estimators against the sub-Gaussian bound.
    Benchmark(BenchmarkArgs),
    /// Oracle smoothed Fisher information over a grid of radii.
    FisherSweep(SweepArgs),
    /// Normalized L2 error of the clipped KDE score against the true smoothed score.
    ScoreDiagnostic(DiagnosticArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Sample file: one number per line, `#` comments allowed.
    #[arg(long = "in", conflicts_with_all = ["spec", "n"])]
    pub input: Option<PathBuf>,
    /// Generate samples from this distribution instead.
    #[arg(long, requires = "n")]
    pub spec: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Disable score clipping.
    #[arg(long)]
    pub no_clip: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// JSON experiment file; other experiment flags are then ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub spec: Option<String>,
    #[arg(long, required_unless_present = "config")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Comma-separated subset of global, empirical_mean, median_of_means, median_pairwise_means.
    #[arg(long, value_delimiter = ',', default_value = "global,empirical_mean")]
    pub estimators: Vec<String>,
    #[arg(long)]
    pub no_clip: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: String,
    /// `a:b:logK`, `a:b:K` or a comma-separated list.
    #[arg(long)]
    pub r_grid: String,
}

#[derive(Debug, Args)]
pub struct DiagnosticArgs {
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub r: f64,
    /// KDE sample size.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Number of independent KDE fits to average over.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
}

fn clipping(no_clip: bool) -> Clipping {
    if no_clip {
        Clipping::Disabled
    } else {
        Clipping::Enabled
    }
}

impl Cli {
    pub fn run(self) -> Result<()> {
        let seed = self.seed.unwrap_or(0);
        let out = self.out.as_deref();
        match self.command {
            Command::Estimate(a) => {
                let samples = match (&a.input, &a.spec, a.n) {
                    (Some(path), _, _) => io::read_samples(path)?,
                    (None, Some(spec), Some(n)) => {
                        parse_spec(spec)?.sample(&mut RngStream::new(seed, SAMPLE_TAG, 0), n)
                    }
                    _ => return Err(CliError::Parse("give either --in FILE or --spec SPEC --n N".into())),
                };
                let cfg =
                    EstimatorConfig { delta: a.delta, r: a.r, xi: a.xi, seed, clipping: clipping(a.no_clip) };
                let result = global_estimate(&samples, &cfg)?;
                for w in &result.diagnostics.warnings {
                    eprintln!("warning: {w}");
                }
                io::emit(out, &io::to_json(&result)?)
            }
            Command::Benchmark(a) => {
                let mut cfg = match &a.config {
                    Some(path) => {
                        let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                        let mut cfg: ExperimentConfig = serde_json::from_str(&raw)?;
                        if let Some(s) = self.seed {
                            cfg.seed = s;
                        }
                        cfg
                    }
                    None => {
                        let spec = parse_spec(a.spec.as_deref().unwrap_or_default())?;
                        let mut cfg =
                            ExperimentConfig::new(spec, a.n.unwrap_or_default(), a.delta, a.trials, seed);
                        cfg.r = a.r;
                        cfg.xi = a.xi;
                        cfg.clipping = clipping(a.no_clip);
                        cfg.estimators = a
                            .estimators
                            .iter()
                            .map(|name| {
                                EstimatorKind::from_name(name.trim())
                                    .ok_or_else(|| CliError::Parse(format!("unknown estimator `{name}`")))
                            })
                            .collect::<Result<_>>()?;
                        cfg
                    }
                };
                cfg.estimators.dedup();
                let report = harness::run_trials(&cfg)?;
                match out {
                    Some(dir) => io::write_report_dir(dir, &report),
                    None => match self.format.unwrap_or(Format::Csv) {
                        Format::Csv => io::emit(None, &io::summary_csv(&report)?),
                        Format::Json => io::emit(None, &io::to_json(&report)?),
                    },
                }
            }
            Command::FisherSweep(a) => {
                let rows = harness::fisher_sweep(&parse_spec(&a.spec)?, &parse_r_grid(&a.r_grid)?)?;
                for row in &rows {
                    if let Some(e) = &row.error {
                        eprintln!("warning: r = {}: {e}", row.r);
                    }
                }
                let body = match self.format.unwrap_or(Format::Csv) {
                    Format::Csv => io::sweep_csv(&rows)?,
                    Format::Json => io::to_json(&rows)?,
                };
                io::emit(out, &body)
            }
            Command::ScoreDiagnostic(a) => {
                let seeds: Vec<u64> =
                    (0..a.seeds).map(|i| stream_id(seed, harness::DIAGNOSTIC_TAG, i)).collect();
                let value = harness::score_l2_diagnostic(&parse_spec(&a.spec)?, a.r, a.n, a.delta, &seeds)?;
                let body = match self.format.unwrap_or(Format::Json) {
                    Format::Csv => format!(
                        "r,n,delta,seeds,normalized_l2\n{},{},{},{},{value}\n",
                        a.r, a.n, a.delta, a.seeds
                    ),
                    Format::Json => io::to_json(&serde_json::json!({
                        "r": a.r, "n": a.n, "delta": a.delta, "seeds": a.seeds, "normalized_l2": value,
                    }))?,
                };
                io::emit(out, &body)
            }
        }
    }
}

/// Parses `argv`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
