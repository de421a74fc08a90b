//! `cavsolve`: solve, verify and sweep constrained concavification problems
//! stored as JSON files.
//!
//! Exit codes: 0 success, 1 internal failure, 2 malformed input, 3 infeasible
//! problem, 4 atom budget exceeded, 5 certification failure.

mod error;
mod pipeline;
mod problem;
mod sweep;
mod verify;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cavsolve::grid::DEFAULT_ATOM_BUDGET;
use cavsolve::oracle::DEFAULT_SUBSET_BUDGET;
use cavsolve::tol;

use crate::error::CliError;
use crate::pipeline::{Settings, Tolerances};

const DEFAULT_MESH: u32 = 32;

#[derive(Parser)]
#[command(name = "cavsolve", version)]
#[command(about = "Constrained concavification over a simplex grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write a JSON report
    Solve {
        /// Problem file (JSON)
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Certify a problem with independent checks, or replay a solve report
    Verify {
        /// Problem file (JSON)
        #[arg(required_unless_present_any = ["random", "report"])]
        problem: Option<PathBuf>,
        /// Check this many seeded random instances instead of a file
        #[arg(long, value_name = "N", conflicts_with_all = ["problem", "report"])]
        random: Option<u64>,
        /// Re-check a report written by `solve`
        #[arg(long, value_name = "PATH", conflicts_with = "problem")]
        report: Option<PathBuf>,
        /// Base seed for --random
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest number of supports the brute-force check may enumerate
        #[arg(long, default_value_t = DEFAULT_SUBSET_BUDGET)]
        oracle_budget: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Trace the optimal value as one constraint threshold moves (CSV)
    Sweep {
        /// Problem file (JSON)
        problem: PathBuf,
        /// Index of the swept constraint (0-based)
        #[arg(long, short = 'c')]
        constraint: usize,
        /// First threshold
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        /// Last threshold
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        /// Number of thresholds, endpoints included
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Grid denominator (default 32; `verify --random` cycles 6, 8, 12)
    #[arg(long = "mesh", short = 'd')]
    mesh: Option<u32>,
    /// Feasibility tolerance
    #[arg(long, default_value_t = tol::FEASIBILITY)]
    tol: f64,
    /// Tolerance for classifying an inequality as binding
    #[arg(long, default_value_t = tol::BINDING)]
    binding_tol: f64,
    /// Output path (default stdout)
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Largest grid to tabulate
    #[arg(long, default_value_t = DEFAULT_ATOM_BUDGET)]
    atom_budget: u64,
    /// Record the generation time in the report
    #[arg(long)]
    timestamp: bool,
}

impl Common {
    fn tolerances(&self) -> Tolerances {
        Tolerances { feasibility: self.tol, binding: self.binding_tol }
    }

    fn settings(&self) -> Settings {
        Settings { mesh: self.mesh.unwrap_or(DEFAULT_MESH), tol: self.tolerances(), atom_budget: self.atom_budget }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.mesh == Some(0) {
            return Err(CliError::Usage("--mesh must be positive".into()));
        }
        for (flag, v) in [("--tol", self.tol), ("--binding-tol", self.binding_tol)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Usage(format!("{flag} must be a nonnegative number")));
            }
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CAVSOLVE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Solve { problem, common } => {
            common.validate()?;
            let spec = problem::load_problem(&problem)?;
            let mut out = pipeline::run_solve(&spec, &common.settings())?;
            if common.timestamp {
                out.generated_at = Some(now());
            }
            write_json(&out, common.out.as_deref())?;
            if !out.is_optimal() {
                let out_of_range: Vec<usize> =
                    out.constraints.iter().filter(|d| d.out_of_range).map(|d| d.index).collect();
                eprintln!("infeasible: thresholds out of reach for constraints {out_of_range:?}");
                return Ok(3);
            }
            if out.feasibility.as_ref().is_some_and(|v| !v.ok) {
                eprintln!("reduced plan fails the feasibility re-check at tolerance {}", common.tol);
                return Ok(5);
            }
            Ok(0)
        }
        Command::Verify { problem, random, report, seed, oracle_budget, common } => {
            common.validate()?;
            let passed = if let Some(count) = random {
                if common.mesh.is_some_and(|d| d > 12) {
                    return Err(CliError::Usage("--random instances need --mesh at most 12".into()));
                }
                let out = verify::verify_random(count, seed, common.mesh, common.tolerances(), oracle_budget)?;
                write_json(&out, common.out.as_deref())?;
                out.passed
            } else if let Some(path) = report {
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::Input { path: path.clone(), detail: e.to_string() })?;
                let out = verify::verify_report(&text, common.atom_budget)
                    .map_err(|detail| CliError::Input { path, detail })?;
                write_json(&out, common.out.as_deref())?;
                out.passed
            } else {
                let path = problem.expect("clap requires a problem file here");
                let spec = problem::load_problem(&path)?;
                let out = verify::verify_problem(&spec, &common.settings(), oracle_budget)?;
                write_json(&out, common.out.as_deref())?;
                out.passed
            };
            Ok(if passed { 0 } else { 5 })
        }
        Command::Sweep { problem, constraint, from, to, steps, common } => {
            common.validate()?;
            let spec = problem::load_problem(&problem)?;
            let csv = sweep::run_sweep(&spec, constraint, from, to, steps, &common.settings())?;
            write_text(&csv, common.out.as_deref())?;
            Ok(0)
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_text(&text, out)
}

fn write_text(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Output { path: path.to_path_buf(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Output { path: PathBuf::from("<stdout>"), source }),
    }
}
