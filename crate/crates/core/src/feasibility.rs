use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::AtomTable;
use crate::model::{ConstraintKind, ProblemSpec, SplittingPlan};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    NegativeWeight { atom: usize, weight: f64 },
    ExcludedAtom { atom: usize },
    WeightSum { total: f64, magnitude: f64 },
    BayesPlausibility { state: usize, barycenter: f64, prior: f64, magnitude: f64 },
    Constraint { index: usize, kind: ConstraintKind, aggregate: f64, threshold: f64, magnitude: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeWeight { atom, weight } => write!(f, "atom {atom} has weight {weight}"),
            Violation::ExcludedAtom { atom } => write!(f, "atom {atom} has objective -inf"),
            Violation::WeightSum { total, .. } => write!(f, "weights sum to {total}"),
            Violation::BayesPlausibility { state, barycenter, prior, .. } => {
                write!(f, "state {state}: barycenter {barycenter} vs prior {prior}")
            }
            Violation::Constraint { index, kind, aggregate, threshold, magnitude } => write!(
                f,
                "constraint {index} ({kind:?}): aggregate {aggregate} vs threshold {threshold} (off by {magnitude})"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityVerdict {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for FeasibilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("feasible");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks Bayes plausibility, weight normalization and every constraint of
/// `problem` for a plan over `table`.
pub fn check_plan_feasibility(
    plan: &SplittingPlan,
    problem: &ProblemSpec,
    table: &AtomTable,
    tol: f64,
) -> Result<FeasibilityVerdict> {
    table.check_compatible(problem)?;
    if let Some(e) = plan.entries().iter().find(|e| e.atom >= table.len()) {
        return Err(Error::AtomIndex { index: e.atom, len: table.len() });
    }

    let mut violations = Vec::new();
    for e in plan.entries() {
        if e.weight < 0.0 {
            violations.push(Violation::NegativeWeight { atom: e.atom, weight: e.weight });
        }
        if table.atom(e.atom).is_excluded() {
            violations.push(Violation::ExcludedAtom { atom: e.atom });
        }
    }

    let total = plan.total_weight();
    if (total - 1.0).abs() > tol {
        violations.push(Violation::WeightSum { total, magnitude: (total - 1.0).abs() });
    }

    let bary = plan.barycenter(table);
    for (state, (&b, &p)) in bary.iter().zip(problem.prior().probs()).enumerate() {
        if (b - p).abs() > tol {
            violations.push(Violation::BayesPlausibility {
                state,
                barycenter: b,
                prior: p,
                magnitude: (b - p).abs(),
            });
        }
    }

    for (index, c) in problem.constraints().iter().enumerate() {
        let aggregate = plan.aggregate(table, index);
        if !c.is_met(aggregate, tol) {
            let magnitude = match c.kind {
                ConstraintKind::Ge => c.threshold - aggregate,
                ConstraintKind::Eq => (aggregate - c.threshold).abs(),
            };
            violations.push(Violation::Constraint {
                index,
                kind: c.kind,
                aggregate,
                threshold: c.threshold,
                magnitude,
            });
        }
    }

    Ok(FeasibilityVerdict { ok: violations.is_empty(), violations })
}
