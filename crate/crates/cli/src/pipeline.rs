use cavsolve::caratheodory::reduce_support_slack_with;
use cavsolve::feasibility::FeasibilityVerdict;
use cavsolve::{
    check_plan_feasibility, solve_constrained, AtomTable, ConstraintDiagnostic, ExtReal, ProblemSpec,
    SolveStatus, SplittingPlan,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    pub feasibility: f64,
    pub binding: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub mesh: u32,
    pub tol: Tolerances,
    pub atom_budget: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanRow {
    pub weight: f64,
    pub belief: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportSummary {
    /// Support of the optimal basic solution.
    pub optimal: usize,
    pub reduced: usize,
    /// `N + M + K - r`, plus one per promoted constraint.
    pub bound: usize,
    pub promoted: Vec<usize>,
}

/// Everything `solve` writes. Field order is the serialization order.
#[derive(Clone, Debug, Serialize)]
pub struct SolveOutput {
    pub status: SolveStatus,
    pub value: ExtReal,
    pub mesh: u32,
    pub atoms: usize,
    pub tolerance: Tolerances,
    pub problem: ProblemSpec,
    pub plan: Vec<PlanRow>,
    pub support: Option<SupportSummary>,
    pub binding: Vec<usize>,
    pub constraints: Vec<ConstraintDiagnostic>,
    pub feasibility: Option<FeasibilityVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

impl SolveOutput {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

pub fn build_table(problem: &ProblemSpec, settings: &Settings) -> Result<AtomTable, CliError> {
    Ok(AtomTable::grid(problem, settings.mesh, settings.atom_budget)?)
}

/// Solve, thin the support down to `N + M + K - r` atoms, classify the
/// constraints and re-check the final plan.
pub fn run_solve(problem: &ProblemSpec, settings: &Settings) -> Result<SolveOutput, CliError> {
    let table = build_table(problem, settings)?;
    solve_on(problem, &table, settings)
}

pub fn solve_on(problem: &ProblemSpec, table: &AtomTable, settings: &Settings) -> Result<SolveOutput, CliError> {
    let report = solve_constrained(problem, table)?;
    let mut out = SolveOutput {
        status: report.status,
        value: report.value,
        mesh: settings.mesh,
        atoms: table.len(),
        tolerance: settings.tol,
        problem: problem.clone(),
        plan: Vec::new(),
        support: None,
        binding: Vec::new(),
        constraints: report.diagnostics,
        feasibility: None,
        generated_at: None,
    };
    let Some(optimum) = report.plan else {
        return Ok(out);
    };

    let reduced = reduce_support_slack_with(&optimum, problem, table, settings.tol.binding)?;
    let plan = &reduced.plan;
    out.value = ExtReal::Finite(plan.value());
    out.plan = plan_rows(plan, table);
    out.support = Some(SupportSummary {
        optimal: optimum.support_size(),
        reduced: plan.support_size(),
        bound: reduced.bound(problem.n_states()),
        promoted: reduced.promoted.clone(),
    });
    out.binding = reduced.report.binding.clone();
    out.constraints = diagnostics(problem, plan, table);
    out.feasibility = Some(check_plan_feasibility(plan, problem, table, settings.tol.feasibility)?);
    Ok(out)
}

fn plan_rows(plan: &SplittingPlan, table: &AtomTable) -> Vec<PlanRow> {
    plan.entries()
        .iter()
        .map(|e| {
            let atom = table.atom(e.atom);
            PlanRow {
                weight: e.weight,
                belief: atom.belief.probs().to_vec(),
                objective: atom.f_value.finite().expect("plan atoms have finite objective"),
                constraints: atom.g_values.clone(),
            }
        })
        .collect()
}

fn diagnostics(problem: &ProblemSpec, plan: &SplittingPlan, table: &AtomTable) -> Vec<ConstraintDiagnostic> {
    problem
        .constraints()
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let aggregate = plan.aggregate(table, index);
            ConstraintDiagnostic {
                index,
                kind: c.kind,
                threshold: c.threshold,
                aggregate: Some(aggregate),
                slack: Some(aggregate - c.threshold),
                achievable: None,
                out_of_range: false,
            }
        })
        .collect()
}
