use std::fmt::Write;

use cavsolve::ProblemSpec;

use crate::error::CliError;
use crate::pipeline::{build_table, solve_on, Settings};

pub const HEADER: &str = "gamma,value,support,binding_count";

/// `steps` evenly spaced thresholds from `from` to `to` for constraint
/// `constraint`, one CSV row each. Infeasible rows read `-inf,0,0`.
pub fn run_sweep(
    problem: &ProblemSpec,
    constraint: usize,
    from: f64,
    to: f64,
    steps: usize,
    settings: &Settings,
) -> Result<String, CliError> {
    if constraint >= problem.n_constraints() {
        return Err(CliError::Usage(format!(
            "constraint index {constraint} out of range: the problem has {} constraints",
            problem.n_constraints()
        )));
    }
    if steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    let table = build_table(problem, settings)?;
    let mut csv = String::from(HEADER);
    csv.push('\n');
    for i in 0..steps {
        let gamma = if steps == 1 { from } else { from + (to - from) * i as f64 / (steps - 1) as f64 };
        let out = solve_on(&problem.with_threshold(constraint, gamma)?, &table, settings)?;
        let support = out.support.as_ref().map_or(0, |s| s.reduced);
        writeln!(csv, "{gamma},{},{support},{}", out.value, out.binding.len()).expect("writing to a string");
    }
    Ok(csv)
}
