use std::fs;
use std::path::Path;

use cavsolve::{Belief, ConstraintSpec, FunctionSpec, ProblemSpec};
use serde::Deserialize;

use crate::error::CliError;

/// On-disk problem layout. `states` may be omitted, in which case states are
/// labelled `s0, s1, ...`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(default)]
    states: Option<Vec<String>>,
    prior: Vec<f64>,
    objective: FunctionSpec,
    #[serde(default)]
    constraints: Vec<ConstraintSpec>,
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    parse_problem(&text).map_err(|detail| CliError::Input { path: path.to_path_buf(), detail })
}

/// Parses and validates a problem, returning a diagnostic that names the
/// line and column or the offending field.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, String> {
    let file: ProblemFile = serde_json::from_str(text)
        .map_err(|e| e.to_string())?;
    let prior = Belief::new(file.prior).map_err(|e| format!("field `prior`: {e}"))?;
    let states = match file.states {
        Some(s) if s.len() != prior.len() => {
            return Err(format!(
                "field `states`: {} labels for a prior over {} states",
                s.len(),
                prior.len()
            ))
        }
        Some(s) => s,
        None => (0..prior.len()).map(|i| format!("s{i}")).collect(),
    };
    ProblemSpec::new(states, prior, file.objective, file.constraints).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("constraint") {
            format!("field `constraints`: {msg}")
        } else if msg.contains("states") {
            format!("field `prior`: {msg}")
        } else {
            format!("field `objective`: {msg}")
        }
    })
}
