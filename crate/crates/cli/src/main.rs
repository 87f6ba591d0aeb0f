//! Coverage-driven verification command line.
//!
//! Subcommands:
//! * `cover`        - evaluate coverpoints on a trace (or a fresh simulation)
//!                    and accumulate the results into the coverage database.
//! * `bode-explore` - AC analysis, peak detection, and transients at the peak
//!                    and comparison frequencies to extend range coverage.
//! * `bayes-opt`    - Gaussian-process Bayesian optimization driving a
//!                    coverpoint observable toward a gap edge or illegal bin.
//! * `report`       - print the accumulated coverage gap and bug hits.
//!
//! Exit codes: 0 success, 1 usage or input-parse error, 2 runtime failure,
//! 3 bug-bin hit detected.

mod commands;

use clap::Parser;
use commands::{BayesOpts, BodeOpts, CoverOpts, ReportOpts};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "anacov", version, about = "Analog coverage toolkit")]
enum Cli {
    /// Evaluate coverpoints on a trace and accumulate coverage.
    Cover(CoverOpts),
    /// Find Bode-plot peaks and compare output ranges across frequencies.
    #[command(name = "bode-explore")]
    BodeExplore(BodeOpts),
    /// Close coverage gaps or hunt illegal bins with Bayesian optimization.
    #[command(name = "bayes-opt")]
    BayesOpt(BayesOpts),
    /// Report the accumulated coverage gap and bug hits.
    Report(ReportOpts),
}

/// A failure carrying the process exit code mandated for its class.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn usage_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: e.into() }
}

pub fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli {
        Cli::Cover(opts) => commands::cmd_cover(opts),
        Cli::BodeExplore(opts) => commands::cmd_bode_explore(opts),
        Cli::BayesOpt(opts) => commands::cmd_bayes_opt(opts),
        Cli::Report(opts) => commands::cmd_report(opts),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
