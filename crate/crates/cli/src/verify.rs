use cavsolve::caratheodory::reduce_support_slack_with;
use cavsolve::concavify::assemble;
use cavsolve::lp::{certify_optimality, solve_lp, LpStatus};
use cavsolve::oracle::{brute_force_value, random_problem, subset_count};
use cavsolve::{
    check_plan_feasibility, solve_constrained, tabulate, verify_equivalence, AtomTable, Belief, ConstraintSpec,
    ExtReal, FunctionSpec, ProblemSpec, SplittingPlan,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::pipeline::{build_table, PlanRow, Settings, SupportSummary, Tolerances};

/// Agreement required of every certification.
pub const CERTIFY_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, residual: Option<f64>, detail: String) -> Self {
        let status = if pass { CheckStatus::Pass } else { CheckStatus::Fail };
        Check { name, status, residual, detail }
    }

    fn skipped(name: &'static str, detail: String) -> Self {
        Check { name, status: CheckStatus::Skipped, residual: None, detail }
    }

    fn failed(name: &'static str, err: impl std::fmt::Display) -> Self {
        Check::new(name, false, None, err.to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyOutput {
    pub mesh: u32,
    pub atoms: usize,
    pub value: ExtReal,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomInstance {
    pub seed: u64,
    pub states: usize,
    pub constraints: usize,
    pub inequalities: usize,
    pub mesh: u32,
    pub value: ExtReal,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomOutput {
    pub instances: Vec<RandomInstance>,
    pub failed: Vec<u64>,
    pub passed: bool,
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.status != CheckStatus::Fail)
}

pub fn verify_problem(problem: &ProblemSpec, settings: &Settings, oracle_budget: u64) -> Result<VerifyOutput, CliError> {
    let table = build_table(problem, settings)?;
    let (value, checks) = run_checks(problem, &table, settings.tol, oracle_budget)?;
    Ok(VerifyOutput { mesh: settings.mesh, atoms: table.len(), value, passed: all_pass(&checks), checks })
}

/// The independent certifications of one instance: lifted program, dual
/// multipliers, support reduction and (budget permitting) enumeration.
fn run_checks(
    problem: &ProblemSpec,
    table: &AtomTable,
    tol: Tolerances,
    oracle_budget: u64,
) -> Result<(ExtReal, Vec<Check>), CliError> {
    let report = solve_constrained(problem, table)?;
    let mut checks = Vec::new();

    checks.push(match verify_equivalence(problem, table) {
        Ok(eq) => Check::new(
            "equivalence",
            eq.certified,
            Some(eq.max_abs_diff),
            format!("constrained {} vs lifted {}", eq.primal, eq.lifted),
        ),
        Err(e) => Check::failed("equivalence", e),
    });

    let program = assemble(problem, table)?;
    let sol = solve_lp(&program.lp).map_err(cavsolve::Error::from)?;
    checks.push(if sol.status == LpStatus::Optimal {
        let cert = certify_optimality(&program.lp, &sol);
        let gap = (cert.dual_value - sol.value).abs();
        Check::new(
            "duality",
            cert.certifies(sol.value, CERTIFY_TOL),
            Some(gap.max(cert.max_reduced_cost.max(0.0))),
            format!("dual value {}, largest reduced cost {:e}", cert.dual_value, cert.max_reduced_cost),
        )
    } else {
        Check::skipped("duality", format!("program is {:?}", sol.status).to_lowercase())
    });

    checks.push(match &report.plan {
        Some(plan) => reduction_check(problem, table, plan, tol),
        None => Check::skipped("reduction", "no feasible plan".into()),
    });

    let cap = problem.n_states() + problem.n_constraints();
    let subsets = subset_count(table, cap);
    checks.push(if subsets > oracle_budget as u128 {
        Check::skipped("brute_force", format!("{subsets} subsets of size {cap} exceed the budget of {oracle_budget}"))
    } else {
        match brute_force_value(problem, table, cap, oracle_budget) {
            Ok(bf) => {
                let (ok, residual) = agreement(bf.value, report.value);
                Check::new(
                    "brute_force",
                    ok,
                    residual,
                    format!("{} over {subsets} supports of size {cap} vs program {}", bf.value, report.value),
                )
            }
            Err(e) => Check::failed("brute_force", e),
        }
    });

    Ok((report.value, checks))
}

fn agreement(a: ExtReal, b: ExtReal) -> (bool, Option<f64>) {
    match (a, b) {
        (ExtReal::Finite(x), ExtReal::Finite(y)) => ((x - y).abs() <= CERTIFY_TOL, Some((x - y).abs())),
        (x, y) => (x == y, None),
    }
}

fn reduction_check(problem: &ProblemSpec, table: &AtomTable, plan: &SplittingPlan, tol: Tolerances) -> Check {
    let out = match reduce_support_slack_with(plan, problem, table, tol.binding) {
        Ok(out) => out,
        Err(e) => return Check::failed("reduction", e),
    };
    let bound = out.bound(problem.n_states());
    let drift = (out.plan.value() - plan.value()).abs();
    let feasible = check_plan_feasibility(&out.plan, problem, table, tol.feasibility).is_ok_and(|v| v.ok);
    Check::new(
        "reduction",
        feasible && out.plan.support_size() <= bound && drift <= CERTIFY_TOL,
        Some(drift),
        format!(
            "support {} -> {} (bound {bound}), {}",
            plan.support_size(),
            out.plan.support_size(),
            if feasible { "feasible" } else { "infeasible" }
        ),
    )
}

/// Property-test mode: `count` seeded instances cycling through two and three
/// states, up to two constraints and grids of 6, 8 and 12.
pub fn verify_random(
    count: u64,
    seed: u64,
    mesh: Option<u32>,
    tol: Tolerances,
    oracle_budget: u64,
) -> Result<RandomOutput, CliError> {
    let mut instances = Vec::new();
    let mut failed = Vec::new();
    for i in 0..count {
        let n = 2 + (i % 2) as usize;
        let k = ((i / 2) % 3) as usize;
        let r = ((i / 18) as usize) % (k + 1);
        let d = mesh.unwrap_or([6, 8, 12][((i / 6) % 3) as usize]);
        let s = seed.wrapping_add(i);
        let (problem, table) = random_problem(s, n, k, r, d)?;
        let (value, checks) = run_checks(&problem, &table, tol, oracle_budget)?;
        if !all_pass(&checks) {
            failed.push(s);
        }
        instances.push(RandomInstance { seed: s, states: n, constraints: k, inequalities: r, mesh: d, value, checks });
    }
    Ok(RandomOutput { passed: failed.is_empty(), instances, failed })
}

/// The fields of a solve report that a replay needs.
#[derive(Debug, Deserialize)]
struct ReportReplay {
    value: ExtReal,
    mesh: u32,
    tolerance: Tolerances,
    problem: ReplayProblem,
    plan: Vec<PlanRow>,
    support: Option<SupportSummary>,
}

#[derive(Debug, Deserialize)]
struct ReplayProblem {
    states: Vec<String>,
    prior: Belief,
    objective: FunctionSpec,
    constraints: Vec<ConstraintSpec>,
}

/// Re-checks a solve report: the plan against its problem at the stated
/// tolerance, the stated value against the plan, and the optimum against a
/// fresh solve on the stated grid.
pub fn verify_report(text: &str, atom_budget: u64) -> Result<VerifyOutput, String> {
    let replay: ReportReplay =
        serde_json::from_str(text).map_err(|e| e.to_string())?;
    let p = replay.problem;
    let problem = ProblemSpec::new(p.states, p.prior, p.objective, p.constraints)
        .map_err(|e| format!("field `problem`: {e}"))?;
    let mut checks = Vec::new();

    let settings = Settings { mesh: replay.mesh, tol: replay.tolerance, atom_budget };
    let fresh = build_table(&problem, &settings)
        .map_err(|e| e.to_string())
        .and_then(|t| solve_constrained(&problem, &t).map(|r| (t.len(), r.value)).map_err(|e| e.to_string()));
    let atoms = fresh.as_ref().map_or(0, |f| f.0);
    checks.push(match &fresh {
        Ok((_, v)) => {
            let (ok, residual) = agreement(*v, replay.value);
            Check::new("optimum", ok, residual, format!("stated {} vs re-solved {v}", replay.value))
        }
        Err(e) => Check::failed("optimum", e),
    });

    if replay.plan.is_empty() {
        checks.push(Check::skipped("plan", "report carries no plan".into()));
    } else {
        checks.push(plan_check(&problem, &replay.plan, replay.value, replay.tolerance.feasibility));
    }

    if let Some(support) = &replay.support {
        let ok = replay.plan.len() == support.reduced && support.reduced <= support.bound;
        checks.push(Check::new(
            "support",
            ok,
            None,
            format!("{} atoms listed, {} stated, bound {}", replay.plan.len(), support.reduced, support.bound),
        ));
    }

    Ok(VerifyOutput { mesh: replay.mesh, atoms, value: replay.value, passed: all_pass(&checks), checks })
}

fn plan_check(problem: &ProblemSpec, rows: &[PlanRow], value: ExtReal, tol: f64) -> Check {
    let beliefs: Result<Vec<Belief>, _> = rows.iter().map(|r| Belief::new(r.belief.clone())).collect();
    let table = match beliefs.and_then(|b| tabulate(problem, b)) {
        Ok(t) => t,
        Err(e) => return Check::failed("plan", e),
    };
    let plan = match SplittingPlan::from_weights(&table, rows.iter().enumerate().map(|(i, r)| (i, r.weight))) {
        Ok(p) => p,
        Err(e) => return Check::failed("plan", e),
    };
    let verdict = match check_plan_feasibility(&plan, problem, &table, tol) {
        Ok(v) => v,
        Err(e) => return Check::failed("plan", e),
    };
    let (agrees, residual) = agreement(ExtReal::Finite(plan.value()), value);
    Check::new("plan", verdict.ok && agrees, residual, format!("{verdict}; plan value {}", plan.value()))
}
