//! The constrained concavification program on a finite atom table.
//!
//! Over weights `w_m >= 0` on the non-excluded atoms:
//!
//! ```text
//! maximize   sum_m w_m f(b_m)
//! subject to sum_m w_m b_m      = prior        (one row per state)
//!            sum_m w_m g_l(b_m) >= gamma_l     (inequality constraints)
//!            sum_m w_m g_l(b_m)  = gamma_l     (equality constraints)
//! ```
//!
//! Every belief sums to one, so the state rows already force `sum_m w_m = 1`.

use crate::caratheodory::binding_report;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::grid::AtomTable;
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::model::{
    Belief, ConstraintDiagnostic, ConstraintKind, ProblemSpec, SolveReport, SolveStatus,
    SplittingPlan, ThresholdRange,
};
use crate::tol;

/// A concavification LP and the atom index behind each of its columns.
#[derive(Clone, Debug)]
pub struct AssembledProgram {
    pub lp: LinearProgram,
    pub columns: Vec<usize>,
}

/// Builds the program over the non-excluded atoms of `table`. Equality rows
/// are the state rows followed by the equality constraints; inequality rows
/// are the inequality constraints in order.
pub fn assemble(problem: &ProblemSpec, table: &AtomTable) -> Result<AssembledProgram> {
    assemble_rows(problem, table, true)
}

fn assemble_rows(problem: &ProblemSpec, table: &AtomTable, constrained: bool) -> Result<AssembledProgram> {
    table.check_compatible(problem)?;
    let columns = table.included();
    if columns.is_empty() {
        return Err(Error::InvalidProblem("every atom has objective -inf".into()));
    }
    let objective = columns
        .iter()
        .map(|&m| table.atom(m).f_value.finite().expect("included atoms are finite"))
        .collect();
    let mut lp = LinearProgram::new(objective);
    for (state, &p) in problem.prior().probs().iter().enumerate() {
        lp.add_eq(columns.iter().map(|&m| table.atom(m).belief.probs()[state]).collect(), p);
    }
    if constrained {
        let g_row = |l: usize| columns.iter().map(|&m| table.atom(m).g_values[l]).collect::<Vec<f64>>();
        for (l, c) in problem.constraints().iter().enumerate() {
            match c.kind {
                ConstraintKind::Eq => lp.add_eq(g_row(l), c.threshold),
                ConstraintKind::Ge => lp.add_ge(g_row(l), c.threshold),
            };
        }
    }
    Ok(AssembledProgram { lp, columns })
}

/// Solves the constrained program. Infeasible instances come back as a
/// report with status `Infeasible` and per-constraint achievable ranges.
pub fn solve_constrained(problem: &ProblemSpec, table: &AtomTable) -> Result<SolveReport> {
    let program = assemble(problem, table)?;
    solve_program(problem, table, &program, true)
}

/// Classical concavification: solves `problem` with its constraint list
/// dropped. An optimal basic solution has at most `N` atoms.
pub fn solve_unconstrained(problem: &ProblemSpec, table: &AtomTable) -> Result<SolveReport> {
    let program = assemble_rows(problem, table, false)?;
    solve_program(problem, table, &program, false)
}

fn solve_program(
    problem: &ProblemSpec,
    table: &AtomTable,
    program: &AssembledProgram,
    constrained: bool,
) -> Result<SolveReport> {
    let sol = solve_lp(&program.lp)?;
    match sol.status {
        LpStatus::Unbounded => Err(Error::Internal(
            "concavification program reported unbounded; weights are confined to the simplex".into(),
        )),
        LpStatus::Infeasible => {
            let diagnostics = if constrained {
                infeasibility_diagnostics(problem, table)?
            } else {
                Vec::new()
            };
            Ok(SolveReport {
                status: SolveStatus::Infeasible,
                value: ExtReal::NegInf,
                plan: None,
                support_size: 0,
                binding: Vec::new(),
                diagnostics,
            })
        }
        LpStatus::Optimal => {
            let plan = SplittingPlan::from_weights(
                table,
                program.columns.iter().copied().zip(sol.x.iter().copied()),
            )?;
            let total = plan.total_weight();
            if (total - 1.0).abs() > tol::FEASIBILITY {
                return Err(Error::Internal(format!("optimal weights sum to {total}")));
            }
            let (binding, diagnostics) = if constrained {
                let report = binding_report(&plan, problem, table, tol::BINDING)?;
                let diagnostics = problem
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
                    .collect();
                (report.binding, diagnostics)
            } else {
                (Vec::new(), Vec::new())
            };
            Ok(SolveReport {
                status: SolveStatus::Optimal,
                value: ExtReal::Finite(plan.value()),
                support_size: plan.support_size(),
                plan: Some(plan),
                binding,
                diagnostics,
            })
        }
    }
}

fn infeasibility_diagnostics(problem: &ProblemSpec, table: &AtomTable) -> Result<Vec<ConstraintDiagnostic>> {
    problem
        .constraints()
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let achievable = match threshold_range(problem, table, index) {
                Ok(r) => Some(r),
                Err(Error::PriorUnreachable) => None,
                Err(e) => return Err(e),
            };
            let out_of_range = achievable.is_none_or(|r| !r.admits(c.kind, c.threshold, tol::FEASIBILITY));
            Ok(ConstraintDiagnostic {
                index,
                kind: c.kind,
                threshold: c.threshold,
                aggregate: None,
                slack: None,
                achievable,
                out_of_range,
            })
        })
        .collect()
}

/// The lifted function: `f(belief)` when the threshold coordinates `gamma`
/// respect the constraint functions at `belief` (`gamma_l <= g_l` for
/// inequalities, `gamma_l == g_l` for equalities, both to within `1e-9`),
/// `-inf` otherwise.
pub fn evaluate_extended(problem: &ProblemSpec, belief: &Belief, gamma: &[f64]) -> Result<ExtReal> {
    if belief.len() != problem.n_states() {
        return Err(Error::DimensionMismatch { expected: problem.n_states(), found: belief.len() });
    }
    if gamma.len() != problem.n_constraints() {
        return Err(Error::DimensionMismatch { expected: problem.n_constraints(), found: gamma.len() });
    }
    for (c, &share) in problem.constraints().iter().zip(gamma) {
        let g = match c.function.eval(belief)? {
            ExtReal::Finite(v) => v,
            ExtReal::NegInf => return Ok(ExtReal::NegInf),
        };
        let ok = match c.kind {
            ConstraintKind::Ge => share <= g + tol::FEASIBILITY,
            ConstraintKind::Eq => (share - g).abs() <= tol::FEASIBILITY,
        };
        if !ok {
            return Ok(ExtReal::NegInf);
        }
    }
    problem.objective().eval(belief)
}

/// Smallest and largest `sum_m w_m g_l(b_m)` over Bayes-plausible weightings
/// of the non-excluded atoms. Each constraint's threshold must lie in reach
/// for the program to be feasible; the converse fails for several constraints.
pub fn threshold_range(problem: &ProblemSpec, table: &AtomTable, constraint: usize) -> Result<ThresholdRange> {
    if constraint >= problem.n_constraints() {
        return Err(Error::InvalidProblem(format!("no constraint with index {constraint}")));
    }
    let base = assemble_rows(problem, table, false)?;
    let g: Vec<f64> = base.columns.iter().map(|&m| table.atom(m).g_values[constraint]).collect();
    let max_lp = base.lp.with_objective(g.clone())?;
    let min_lp = base.lp.with_objective(g.iter().map(|v| -v).collect())?;
    let max = solve_lp(&max_lp)?;
    let min = solve_lp(&min_lp)?;
    match (max.status, min.status) {
        (LpStatus::Optimal, LpStatus::Optimal) => Ok(ThresholdRange { min: 0.0 - min.value, max: max.value + 0.0 }),
        (LpStatus::Infeasible, _) | (_, LpStatus::Infeasible) => Err(Error::PriorUnreachable),
        _ => Err(Error::Internal("threshold range program reported unbounded".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{FunctionSpec, TableFn};
    use crate::grid::{simplex_grid, DEFAULT_ATOM_BUDGET};
    use crate::model::ConstraintSpec;

    fn prosecutor(constraints: Vec<ConstraintSpec>) -> ProblemSpec {
        ProblemSpec::with_default_states(
            Belief::new(vec![0.7, 0.3]).unwrap(),
            FunctionSpec::indicator(1, 0.5, 1.0, 0.0),
            constraints,
        )
        .unwrap()
    }

    fn plan_beliefs(report: &SolveReport, table: &AtomTable) -> Vec<(f64, Vec<f64>)> {
        report
            .plan
            .as_ref()
            .unwrap()
            .entries()
            .iter()
            .map(|e| (e.weight, table.atom(e.atom).belief.probs().to_vec()))
            .collect()
    }

    fn assert_plan(actual: &[(f64, Vec<f64>)], expected: &[(f64, [f64; 2])]) {
        assert_eq!(actual.len(), expected.len(), "{actual:?}");
        for ((w, b), (ew, eb)) in actual.iter().zip(expected) {
            assert!((w - ew).abs() < 1e-9, "{actual:?}");
            assert!(b.iter().zip(eb).all(|(x, y)| (x - y).abs() < 1e-12), "{actual:?}");
        }
    }

    #[test]
    fn unconstrained_prosecutor() {
        let p = prosecutor(vec![]);
        let t = AtomTable::grid(&p, 10, DEFAULT_ATOM_BUDGET).unwrap();
        let r = solve_constrained(&p, &t).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value.finite().unwrap() - 0.6).abs() < 1e-12);
        assert_plan(&plan_beliefs(&r, &t), &[(0.4, [1.0, 0.0]), (0.6, [0.5, 0.5])]);
        let u = solve_unconstrained(&p, &t).unwrap();
        assert_eq!(u.value, r.value);
        assert!(u.support_size <= 2);
    }

    #[test]
    fn full_disclosure_equality() {
        let grid = simplex_grid(2, 10).unwrap();
        let g = TableFn::sample(&grid, |b| ExtReal::Finite(b.probs()[1] * (1.0 - b.probs()[1]))).unwrap();
        let p = prosecutor(vec![ConstraintSpec::eq(FunctionSpec::Table(g), 0.0)]);
        let t = AtomTable::grid(&p, 10, DEFAULT_ATOM_BUDGET).unwrap();
        let r = solve_constrained(&p, &t).unwrap();
        assert!((r.value.finite().unwrap() - 0.3).abs() < 1e-12);
        assert_plan(&plan_beliefs(&r, &t), &[(0.7, [1.0, 0.0]), (0.3, [0.0, 1.0])]);
    }

    #[test]
    fn vacuous_affine_inequality() {
        let g = FunctionSpec::affine(vec![1.0, -1.0], 0.0); // 1 - 2 mu_2
        let p = prosecutor(vec![ConstraintSpec::ge(g, 0.2)]);
        let t = AtomTable::grid(&p, 10, DEFAULT_ATOM_BUDGET).unwrap();
        let r = solve_constrained(&p, &t).unwrap();
        assert!((r.value.finite().unwrap() - 0.6).abs() < 1e-12);
        assert_plan(&plan_beliefs(&r, &t), &[(0.4, [1.0, 0.0]), (0.6, [0.5, 0.5])]);
        assert!(r.binding.is_empty());
        assert!((r.diagnostics[0].aggregate.unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn infeasible_threshold_is_diagnosed() {
        let p = prosecutor(vec![ConstraintSpec::ge(FunctionSpec::entropy(1.0), 0.7)]);
        let t = AtomTable::grid(&p, 16, DEFAULT_ATOM_BUDGET).unwrap();
        let r = solve_constrained(&p, &t).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.value, ExtReal::NegInf);
        assert!(r.plan.is_none());
        assert!(r.diagnostics[0].out_of_range);
        let range = r.diagnostics[0].achievable.unwrap();
        assert!(range.max < 0.7);
    }

    #[test]
    fn extended_function_cases() {
        let g = FunctionSpec::affine(vec![0.0, 1.0], 0.0);
        let b = Belief::new(vec![0.5, 0.5]).unwrap();
        let ge = prosecutor(vec![ConstraintSpec::ge(g.clone(), 0.0)]);
        assert_eq!(evaluate_extended(&ge, &b, &[0.4]).unwrap(), ExtReal::Finite(1.0));
        assert_eq!(evaluate_extended(&ge, &b, &[0.6]).unwrap(), ExtReal::NegInf);
        let eq = prosecutor(vec![ConstraintSpec::eq(g, 0.0)]);
        assert_eq!(evaluate_extended(&eq, &b, &[0.5]).unwrap(), ExtReal::Finite(1.0));
        assert_eq!(evaluate_extended(&eq, &b, &[0.4]).unwrap(), ExtReal::NegInf);
        assert!(evaluate_extended(&eq, &b, &[]).is_err());
    }

    #[test]
    fn threshold_ranges() {
        let affine = FunctionSpec::affine(vec![1.0, -1.0], 0.0);
        let quad = {
            let grid = simplex_grid(2, 64).unwrap();
            FunctionSpec::Table(
                TableFn::sample(&grid, |b| ExtReal::Finite(b.probs()[1] * (1.0 - b.probs()[1]))).unwrap(),
            )
        };
        let p = prosecutor(vec![
            ConstraintSpec::ge(affine, 0.0),
            ConstraintSpec::ge(FunctionSpec::entropy(1.0), 0.0),
            ConstraintSpec::ge(quad, 0.0),
        ]);
        let t = AtomTable::grid(&p, 64, DEFAULT_ATOM_BUDGET).unwrap();
        let r0 = threshold_range(&p, &t, 0).unwrap();
        assert!((r0.min - 0.4).abs() < 1e-12 && (r0.max - 0.4).abs() < 1e-12);
        let r1 = threshold_range(&p, &t, 1).unwrap();
        let h = -(0.7f64 * 0.7f64.ln() + 0.3 * 0.3f64.ln());
        assert!(r1.min.abs() < 1e-12);
        // 0.3 is not a multiple of 1/64: the grid maximum sits just below H(prior)
        assert!(r1.max <= h + 1e-12 && r1.max > h - 1e-3, "{} vs {h}", r1.max);
        let r2 = threshold_range(&p, &t, 2).unwrap();
        assert!(r2.min.abs() < 1e-12);
        assert!(threshold_range(&p, &t, 3).is_err());
    }

    #[test]
    fn mismatched_table_is_structural_error() {
        let p0 = prosecutor(vec![]);
        let p1 = prosecutor(vec![ConstraintSpec::ge(FunctionSpec::entropy(1.0), 0.0)]);
        let t0 = AtomTable::grid(&p0, 4, DEFAULT_ATOM_BUDGET).unwrap();
        assert!(matches!(solve_constrained(&p1, &t0), Err(Error::DimensionMismatch { .. })));
    }
}
